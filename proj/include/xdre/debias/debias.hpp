#ifndef XDRE_DEBIAS_DEBIAS_HPP_
#define XDRE_DEBIAS_DEBIAS_HPP_

// Prediction debiasing: y + lambda * (y_rela - y_bias), where y_rela comes
// from a non-NA classifier on top of the frozen model and y_bias from a
// forward pass with the most attended non-target nodes removed.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "xdre/ad/ops.hpp"
#include "xdre/ad/params.hpp"
#include "xdre/model/model.hpp"
#include "xdre/train/optimizer.hpp"

namespace xdre::debias {

/// Mean attention mass that target-involving query cells put on key cells in
/// row or column v, over layers, heads and such query cells; one entry per
/// non-target node.
template <class S>
std::map<int, S> compute_importance(const head::AttentionTrace<S>& trace, const graph::EntityGraph<S>& g) {
  std::map<int, S> scores;
  const auto non_targets = g.non_target_ids();
  for (int v : non_targets) scores[v] = S(0);
  if (non_targets.empty()) return scores;
  const int n = g.size();
  if (trace.node_count != n) throw std::invalid_argument("compute_importance: trace and graph disagree on node count");

  auto involves_target = [&](Eigen::Index cell) {
    return g.nodes[static_cast<std::size_t>(cell / n)].role.is_target() || g.nodes[static_cast<std::size_t>(cell % n)].role.is_target();
  };
  std::size_t terms = 0;
  for (const auto& layer : trace.weights) {
    for (const auto& w : layer) {
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        const Eigen::Index cell = trace.full() ? r : trace.query_cells[static_cast<std::size_t>(r)];
        if (!involves_target(cell)) continue;
        ++terms;
        for (int v : non_targets) {
          S mass = S(0);
          for (int j = 0; j < n; ++j) mass += w(r, static_cast<Eigen::Index>(v) * n + j);
          for (int i = 0; i < n; ++i) {
            if (i != v) mass += w(r, static_cast<Eigen::Index>(i) * n + v);
          }
          scores[v] += mass;
        }
      }
    }
  }
  if (terms > 0) {
    for (auto& [_, s] : scores) s /= static_cast<S>(terms);
  }
  return scores;
}

/// Number of nodes masked at `rate` out of `count`: ceil(rate * count),
/// ignoring rounding noise in the product.
inline int mask_count(double rate, int count) {
  if (rate < 0 || rate > 1) throw std::invalid_argument("mask_rate must lie in [0, 1]");
  const double exact = rate * static_cast<double>(count);
  return std::min(count, static_cast<int>(std::ceil(exact - 1e-9 * std::max(1.0, exact))));
}

/// Removes the ceil(rate * #non-target) highest scoring non-target nodes
/// (lower node id first on ties) together with their edges.
template <class S>
graph::EntityGraph<S> mask_top(const graph::EntityGraph<S>& g, const std::map<int, S>& scores, double rate) {
  std::vector<int> order = g.non_target_ids();
  for (int v : order) {
    if (!scores.count(v)) throw std::invalid_argument("mask_top: no importance score for node " + std::to_string(v));
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const S sa = scores.at(a), sb = scores.at(b);
    if (sa != sb) return sa > sb;
    return a < b;
  });
  const int k = mask_count(rate, static_cast<int>(order.size()));
  return g.without(std::set<int>(order.begin(), order.begin() + k));
}

template <class S>
ad::Matrix<S> calibrate(const ad::Matrix<S>& y, const ad::Matrix<S>& y_rela, const ad::Matrix<S>& y_bias, double lambda) {
  if (y.rows() != y_rela.rows() || y.cols() != y_rela.cols() || y.rows() != y_bias.rows() || y.cols() != y_bias.cols()) {
    throw std::invalid_argument("calibrate: score vectors differ in length");
  }
  return y + static_cast<S>(lambda) * (y_rela - y_bias);
}

/// Unmasked and masked pooled scores of one bag plus the unmasked path representations.
template <class S>
struct BiasPass {
  ad::Matrix<S> y;
  ad::Matrix<S> y_bias;
  ad::Matrix<S> path_reprs;
  int masked = 0;
};

template <class S>
BiasPass<S> bias_pass(const model::Model<S>& m, const data::DocumentBag& bag, double mask_rate) {
  ad::Tape<S> tape(false);
  const auto enc = m.encode_bag(tape, bag);
  auto full = m.run(tape, enc, m.build_graph(bag, enc), true);
  BiasPass<S> out;
  out.y = full.pooled.value();
  out.path_reprs = full.path_reprs.value();
  const auto masked = mask_top(full.graph, compute_importance(full.trace, full.graph), mask_rate);
  out.masked = full.graph.size() - masked.size();
  out.y_bias = out.masked == 0 ? out.y : m.run(tape, enc, masked).pooled.value();
  return out;
}

/// Pooled scores of the subgraph left after masking the most important nodes.
template <class S>
ad::Matrix<S> predict_bias(const model::Model<S>& m, const data::DocumentBag& bag, double mask_rate) {
  return bias_pass(m, bag, mask_rate).y_bias;
}

/// Two-layer classifier over r^k with one output per non-NA relation.
template <class S>
class AuxClassifier {
 public:
  void init(int dim, int relations, int hidden, std::mt19937_64& rng) {
    if (relations < 1) throw std::invalid_argument("aux classifier needs at least one non-NA relation");
    params_ = {};
    const int h = hidden > 0 ? hidden : dim;
    params_.add_glorot("aux.hidden.weight", h, dim, rng);
    params_.add_constant("aux.hidden.bias", 1, h, S(0));
    params_.add_glorot("aux.out.weight", relations, h, rng);
    params_.add_constant("aux.out.bias", 1, relations, S(0));
  }

  bool ready() const { return params_.contains("aux.out.weight"); }
  int output_width() const { return static_cast<int>(params_.at("aux.out.weight").rows()); }
  ad::ParamSet<S>& params() { return params_; }
  const ad::ParamSet<S>& params() const { return params_; }

  /// N x K logits, one row per path.
  ad::Var<S> logits(const ad::Var<S>& path_reprs) const {
    auto& tape = path_reprs.tape();
    ad::Var<S> b1 = params_.var(tape, "aux.hidden.bias");
    ad::Var<S> b2 = params_.var(tape, "aux.out.bias");
    ad::Var<S> h = ad::relu(ad::linear(path_reprs, params_.var(tape, "aux.hidden.weight"), &b1));
    return ad::linear(h, params_.var(tape, "aux.out.weight"), &b2);
  }

  /// Bag-level distribution over non-NA relations: softmax of path-maxed logits.
  ad::Var<S> distribution(const ad::Var<S>& path_reprs) const { return ad::softmax_rows(ad::max_rows(logits(path_reprs))); }

  /// Full-size score vector with the NA entry fixed at 0.
  ad::Matrix<S> predict_rela(const ad::Matrix<S>& path_reprs) const {
    ad::Tape<S> tape(false);
    const ad::Matrix<S> p = distribution(tape.constant(path_reprs)).value();
    ad::Matrix<S> out = ad::Matrix<S>::Zero(1, p.cols() + 1);
    out.rightCols(p.cols()) = p;
    return out;
  }

 private:
  ad::ParamSet<S> params_;
};

template <class S>
ad::Matrix<S> predict_rela(const model::Model<S>& m, const AuxClassifier<S>& aux, const data::DocumentBag& bag) {
  ad::Tape<S> tape(false);
  return aux.predict_rela(m.forward(tape, bag, false, true).path_reprs.value());
}

struct AuxResult {
  std::vector<double> loss_curve;
  std::size_t bags = 0;
};

/// Fits the aux classifier on the non-NA bags of `ds`. The backbone only runs
/// on non-recording tapes, so its parameters receive no gradient at all.
template <class S>
AuxResult train_aux(const model::Model<S>& m, const data::Dataset& ds, const AuxConfig& cfg, std::uint64_t seed,
                    AuxClassifier<S>& aux, const std::function<void(int, double)>& on_epoch = {}) {
  std::vector<const data::DocumentBag*> bags;
  for (const auto& b : ds.bags) {
    if (!b.positive_labels().empty()) bags.push_back(&b);
  }
  if (bags.empty()) throw std::invalid_argument("train_aux: the dataset has no non-NA bag");
  std::vector<ad::Matrix<S>> cache;
  cache.reserve(bags.size());
  for (const auto* b : bags) {
    ad::Tape<S> tape(false);
    cache.push_back(m.forward(tape, *b).path_reprs.value());
  }

  std::mt19937_64 rng(seed ^ 0x5bd1e995ull);
  aux.init(m.hidden_dim(), m.labels().size() - 1, cfg.hidden, rng);
  train::AdamW<S> opt(train::AdamWConfig{cfg.lr, 0.9, 0.999, 1e-8, 0.0, 1.0});
  AuxResult result;
  result.bags = bags.size();
  std::vector<std::size_t> order(bags.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      ad::GradStore<S> grads;
      for (std::size_t i = start; i < end; ++i) {
        const std::size_t b = order[i];
        ad::Tape<S> tape;
        std::vector<int> targets;
        for (int l : bags[b]->positive_labels()) targets.push_back(l - 1);
        ad::Var<S> loss = ad::normalized_nll(aux.distribution(tape.constant(cache[b])), targets, S(1e-12));
        tape.backward(loss);
        for (const auto& [name, _] : tape.parameter_grads()) {
          if (name.rfind("aux.", 0) != 0) throw std::logic_error("aux training produced a gradient for backbone parameter " + name);
        }
        grads.accumulate(tape, S(1) / static_cast<S>(end - start));
        total += static_cast<double>(loss.value()(0, 0));
      }
      opt.step(aux.params(), grads);
    }
    result.loss_curve.push_back(total / static_cast<double>(order.size()));
    if (on_epoch) on_epoch(epoch + 1, result.loss_curve.back());
  }
  return result;
}

}  // namespace xdre::debias

#endif  // XDRE_DEBIAS_DEBIAS_HPP_
