#ifndef XDRE_AD_TAPE_HPP_
#define XDRE_AD_TAPE_HPP_

// Minimal reverse-mode automatic differentiation over dense row-major
// matrices. A Tape records every operation of one forward pass; calling
// backward() on a 1x1 result propagates gradients to every recorded node.
// Tapes are independent objects, so concurrent forward passes simply use
// separate tapes.

#include <Eigen/Dense>

#include <cassert>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace xdre::ad {

template <class S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class S>
class Tape;

/// Handle to a node on a tape. Cheap to copy.
template <class S>
class Var {
 public:
  Var() = default;
  Var(Tape<S>* tape, int id) : tape_(tape), id_(id) {}

  const Matrix<S>& value() const { return tape_->value(id_); }
  Matrix<S>& grad() const { return tape_->grad(id_); }
  /// grad() += e, assigning instead when no gradient has arrived yet.
  template <class E>
  void add_grad(const E& e) const {
    tape_->add_grad(id_, e);
  }
  bool needs_grad() const { return tape_->needs_grad(id_); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape<S>& tape() const { return *tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape<S>* tape_ = nullptr;
  int id_ = -1;
};

template <class S>
class Tape {
 public:
  using Backward = std::function<void(const Matrix<S>&)>;

  /// With record=false no backward closures are stored (inference mode).
  explicit Tape(bool record = true) : record_(record) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var<S> constant(Matrix<S> value) {
    nodes_.push_back(Node{std::move(value), nullptr, {}, false, {}});
    return Var<S>(this, static_cast<int>(nodes_.size()) - 1);
  }

  /// Leaf bound to external storage. The same name on one tape always maps
  /// to the same node so shared weights accumulate a single gradient.
  Var<S> parameter(const std::string& name, const Matrix<S>& storage) {
    auto it = param_ids_.find(name);
    if (it != param_ids_.end()) return Var<S>(this, it->second);
    const bool track = record_ && !is_frozen(name);
    nodes_.push_back(Node{Matrix<S>(), &storage, {}, track, {}});
    const int id = static_cast<int>(nodes_.size()) - 1;
    param_ids_.emplace(name, id);
    return Var<S>(this, id);
  }

  /// Parameters whose name starts with `prefix` become constants on this tape.
  void freeze(std::string prefix) { frozen_.push_back(std::move(prefix)); }

  Var<S> record(Matrix<S> value, std::initializer_list<Var<S>> parents, Backward backward) {
    bool track = false;
    if (record_) {
      for (const auto& p : parents) track = track || needs_grad(p.id());
    }
    nodes_.push_back(Node{std::move(value), nullptr, {}, track, track ? std::move(backward) : Backward{}});
    return Var<S>(this, static_cast<int>(nodes_.size()) - 1);
  }

  Var<S> record(Matrix<S> value, const std::vector<Var<S>>& parents, Backward backward) {
    bool track = false;
    if (record_) {
      for (const auto& p : parents) track = track || needs_grad(p.id());
    }
    nodes_.push_back(Node{std::move(value), nullptr, {}, track, track ? std::move(backward) : Backward{}});
    return Var<S>(this, static_cast<int>(nodes_.size()) - 1);
  }

  void backward(const Var<S>& root) {
    if (!record_) throw std::logic_error("backward() on a non-recording tape");
    if (root.rows() != 1 || root.cols() != 1) throw std::logic_error("backward() root must be 1x1");
    for (auto& n : nodes_) n.grad.resize(0, 0);
    if (!nodes_[root.id()].needs_grad) return;
    grad(root.id())(0, 0) = S(1);
    // Gradient buffers are allocated on first use; nodes nothing flowed into are skipped.
    for (int id = root.id(); id >= 0; --id) {
      Node& n = nodes_[id];
      if (n.needs_grad && n.backward && n.grad.size() != 0) n.backward(n.grad);
    }
  }

  const Matrix<S>& value(int id) const {
    const Node& n = nodes_[id];
    return n.external ? *n.external : n.value;
  }
  Matrix<S>& grad(int id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) {
      const auto& v = value(id);
      n.grad = Matrix<S>::Zero(v.rows(), v.cols());
    }
    return n.grad;
  }
  template <class E>
  void add_grad(int id, const E& e) {
    Matrix<S>& gr = nodes_[id].grad;
    if (gr.size() == 0) {
      gr = e;
    } else {
      gr.noalias() += e;
    }
  }
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }

  /// Gradients of every tracked parameter touched by this tape, by name.
  std::vector<std::pair<std::string, const Matrix<S>*>> parameter_grads() {
    std::vector<std::pair<std::string, const Matrix<S>*>> out;
    for (const auto& [name, id] : param_ids_) {
      if (nodes_[id].needs_grad) out.emplace_back(name, &grad(id));
    }
    return out;
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix<S> value;
    const Matrix<S>* external;
    Matrix<S> grad;
    bool needs_grad;
    Backward backward;
  };

  bool is_frozen(const std::string& name) const {
    for (const auto& p : frozen_) {
      if (name.compare(0, p.size(), p) == 0) return true;
    }
    return false;
  }

  bool record_;
  std::vector<Node> nodes_;
  std::map<std::string, int> param_ids_;
  std::vector<std::string> frozen_;
};

}  // namespace xdre::ad

#endif  // XDRE_AD_TAPE_HPP_
