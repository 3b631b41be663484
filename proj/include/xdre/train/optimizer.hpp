#ifndef XDRE_TRAIN_OPTIMIZER_HPP_
#define XDRE_TRAIN_OPTIMIZER_HPP_

#include <cmath>
#include <map>
#include <string>

#include "xdre/ad/params.hpp"

namespace xdre::train {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double grad_clip = 1.0;  // global L2 norm; 0 disables
};

/// Adam with decoupled weight decay. Decay skips row-vector parameters
/// (biases, norm gains). Parameters without a gradient are left untouched.
template <class S>
class AdamW {
 public:
  AdamW() = default;
  explicit AdamW(AdamWConfig cfg) : cfg_(cfg) {}

  const AdamWConfig& config() const { return cfg_; }
  void set_config(const AdamWConfig& cfg) { cfg_ = cfg; }
  long long steps() const { return step_; }
  void set_steps(long long s) { step_ = s; }
  std::map<std::string, ad::Matrix<S>>& first_moments() { return m_; }
  std::map<std::string, ad::Matrix<S>>& second_moments() { return v_; }
  const std::map<std::string, ad::Matrix<S>>& first_moments() const { return m_; }
  const std::map<std::string, ad::Matrix<S>>& second_moments() const { return v_; }

  /// Returns the gradient norm before clipping.
  S step(ad::ParamSet<S>& params, const ad::GradStore<S>& grads) {
    using std::pow;
    using std::sqrt;
    const S norm = sqrt(grads.squared_norm());
    S clip = S(1);
    if (cfg_.grad_clip > 0 && norm > S(cfg_.grad_clip)) clip = S(cfg_.grad_clip) / norm;
    ++step_;
    const S b1 = S(cfg_.beta1), b2 = S(cfg_.beta2);
    const S c1 = S(1) - pow(b1, S(step_));
    const S c2 = S(1) - pow(b2, S(step_));
    const S lr = S(cfg_.lr);
    for (const auto& [name, g_raw] : grads.all()) {
      ad::Matrix<S>& w = params.at(name);
      auto [mi, m_new] = m_.try_emplace(name, ad::Matrix<S>::Zero(w.rows(), w.cols()));
      auto [vi, v_new] = v_.try_emplace(name, ad::Matrix<S>::Zero(w.rows(), w.cols()));
      (void)m_new;
      (void)v_new;
      const ad::Matrix<S> g = g_raw * clip;
      mi->second = b1 * mi->second + (S(1) - b1) * g;
      vi->second = b2 * vi->second + (S(1) - b2) * g.cwiseProduct(g);
      if (cfg_.weight_decay > 0 && w.rows() > 1) w *= S(1) - lr * S(cfg_.weight_decay);
      w.array() -= lr * (mi->second.array() / c1) / ((vi->second.array() / c2).sqrt() + S(cfg_.eps));
    }
    return norm;
  }

 private:
  AdamWConfig cfg_;
  long long step_ = 0;
  std::map<std::string, ad::Matrix<S>> m_, v_;
};

}  // namespace xdre::train

#endif  // XDRE_TRAIN_OPTIMIZER_HPP_
