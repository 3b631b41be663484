#ifndef XDRE_AD_PARAMS_HPP_
#define XDRE_AD_PARAMS_HPP_

#include <cmath>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "xdre/ad/tape.hpp"

namespace xdre::ad {

/// Named, ordered collection of parameter matrices.
template <class S>
class ParamSet {
 public:
  using Store = std::map<std::string, Matrix<S>>;

  Matrix<S>& emplace(const std::string& name, Matrix<S> value) {
    auto [it, inserted] = store_.insert_or_assign(name, std::move(value));
    (void)inserted;
    return it->second;
  }

  /// Glorot-uniform initialization drawn from `rng`.
  Matrix<S>& add_glorot(const std::string& name, Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix<S> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(dist(rng));
    return emplace(name, std::move(m));
  }

  Matrix<S>& add_uniform(const std::string& name, Eigen::Index rows, Eigen::Index cols, double limit,
                         std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix<S> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(dist(rng));
    return emplace(name, std::move(m));
  }

  Matrix<S>& add_constant(const std::string& name, Eigen::Index rows, Eigen::Index cols, S value) {
    return emplace(name, Matrix<S>::Constant(rows, cols, value));
  }

  bool contains(const std::string& name) const { return store_.count(name) != 0; }

  const Matrix<S>& at(const std::string& name) const {
    auto it = store_.find(name);
    if (it == store_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
    return it->second;
  }
  Matrix<S>& at(const std::string& name) {
    auto it = store_.find(name);
    if (it == store_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
    return it->second;
  }

  Var<S> var(Tape<S>& tape, const std::string& name) const { return tape.parameter(name, at(name)); }

  Store& store() { return store_; }
  const Store& store() const { return store_; }
  std::size_t size() const { return store_.size(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, m] : store_) n += static_cast<std::size_t>(m.size());
    return n;
  }

  /// Copies every parameter whose name starts with `prefix` from `other`.
  void merge_prefix(const ParamSet& other, const std::string& prefix) {
    for (const auto& [name, m] : other.store_) {
      if (name.compare(0, prefix.size(), prefix) == 0) store_[name] = m;
    }
  }

  template <class T>
  ParamSet<T> cast() const {
    ParamSet<T> out;
    for (const auto& [name, m] : store_) out.emplace(name, m.template cast<T>());
    return out;
  }

  bool operator==(const ParamSet& o) const {
    if (store_.size() != o.store_.size()) return false;
    for (const auto& [name, m] : store_) {
      auto it = o.store_.find(name);
      if (it == o.store_.end()) return false;
      if (m.rows() != it->second.rows() || m.cols() != it->second.cols()) return false;
      for (Eigen::Index i = 0; i < m.size(); ++i) {
        if (m.data()[i] != it->second.data()[i]) return false;
      }
    }
    return true;
  }

 private:
  Store store_;
};

/// Gradient accumulator keyed by parameter name.
template <class S>
class GradStore {
 public:
  void accumulate(Tape<S>& tape, S weight = S(1)) {
    for (const auto& [name, g] : tape.parameter_grads()) {
      auto it = grads_.find(name);
      if (it == grads_.end()) {
        grads_.emplace(name, *g * weight);
      } else {
        it->second += *g * weight;
      }
    }
  }
  void add(const GradStore& other) {
    for (const auto& [name, g] : other.grads_) {
      auto it = grads_.find(name);
      if (it == grads_.end()) grads_.emplace(name, g);
      else it->second += g;
    }
  }
  void scale(S factor) {
    for (auto& [_, g] : grads_) g *= factor;
  }
  S squared_norm() const {
    S n = S(0);
    for (const auto& [_, g] : grads_) n += g.squaredNorm();
    return n;
  }
  const Matrix<S>* find(const std::string& name) const {
    auto it = grads_.find(name);
    return it == grads_.end() ? nullptr : &it->second;
  }
  const std::map<std::string, Matrix<S>>& all() const { return grads_; }
  bool empty() const { return grads_.empty(); }
  void clear() { grads_.clear(); }

 private:
  std::map<std::string, Matrix<S>> grads_;
};

}  // namespace xdre::ad

#endif  // XDRE_AD_PARAMS_HPP_
