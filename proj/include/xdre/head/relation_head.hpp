#ifndef XDRE_HEAD_RELATION_HEAD_HPP_
#define XDRE_HEAD_RELATION_HEAD_HPP_

#include <algorithm>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "xdre/ad/attention.hpp"
#include "xdre/ad/ops.hpp"
#include "xdre/ad/params.hpp"
#include "xdre/graph/entity_graph.hpp"

namespace xdre::head {

enum class PoolMode { ComponentwiseMax, BestPath };

struct HeadConfig {
  int attn_layers = 2;
  int attn_heads = 8;
  int ffn_dim = 0;      // 0: 4 x hidden
  int mlp_hidden = 0;   // 0: hidden
  PoolMode pool = PoolMode::ComponentwiseMax;
  int max_cells = 64 * 64;
};

/// Attention weights of one forward pass: weights[layer][head] has one row
/// per entry of `query_cells` (all cells when empty) and one column per cell.
template <class S>
struct AttentionTrace {
  int node_count = 0;
  std::vector<Eigen::Index> query_cells;
  std::vector<std::vector<ad::Matrix<S>>> weights;

  int cell_count() const { return node_count * node_count; }
  bool full() const { return query_cells.empty(); }
};

inline constexpr int kRolePairCount = 32;

/// Embedding slot for cell (i, j): the ordered role pair, with a separate
/// slot for the head/tail target pair of one path.
template <class S>
Eigen::Index role_pair_index(const graph::EntityGraph<S>& g, int i, int j) {
  const auto& ri = g.nodes[static_cast<std::size_t>(i)].role;
  const auto& rj = g.nodes[static_cast<std::size_t>(j)].role;
  const int base = static_cast<int>(ri.kind) * 4 + static_cast<int>(rj.kind);
  const bool same_path_targets = ri.is_target() && rj.is_target() && ri.path == rj.path;
  return base + (same_path_targets ? 16 : 0);
}

template <class S>
void init_params(ad::ParamSet<S>& params, int dim, int labels, const HeadConfig& cfg, std::mt19937_64& rng) {
  const int ffn = cfg.ffn_dim > 0 ? cfg.ffn_dim : 4 * dim;
  const int hidden = cfg.mlp_hidden > 0 ? cfg.mlp_hidden : dim;
  params.add_glorot("head.pair.W_u", dim, dim, rng);
  params.add_glorot("head.pair.W_v", dim, dim, rng);
  params.add_constant("head.pair.b_uv", 1, dim, S(0));
  params.add_glorot("head.pair.W", dim, dim, rng);
  params.add_constant("head.pair.b", 1, dim, S(0));
  params.add_uniform("head.role_embedding", kRolePairCount, dim, 0.1, rng);
  for (int l = 0; l < cfg.attn_layers; ++l) {
    const std::string p = "head.attn.l" + std::to_string(l) + ".";
    for (const char* m : {"q", "k", "v", "o"}) {
      params.add_glorot(p + m + ".weight", dim, dim, rng);
      params.add_constant(p + m + ".bias", 1, dim, S(0));
    }
    params.add_constant(p + "ln1.gamma", 1, dim, S(1));
    params.add_constant(p + "ln1.beta", 1, dim, S(0));
    params.add_glorot(p + "ffn.in.weight", ffn, dim, rng);
    params.add_constant(p + "ffn.in.bias", 1, ffn, S(0));
    params.add_glorot(p + "ffn.out.weight", dim, ffn, rng);
    params.add_constant(p + "ffn.out.bias", 1, dim, S(0));
    params.add_constant(p + "ln2.gamma", 1, dim, S(1));
    params.add_constant(p + "ln2.beta", 1, dim, S(0));
  }
  params.add_glorot("head.mlp.hidden.weight", hidden, dim, rng);
  params.add_constant("head.mlp.hidden.bias", 1, hidden, S(0));
  params.add_glorot("head.mlp.out.weight", labels, hidden, rng);
  params.add_constant("head.mlp.out.bias", 1, labels, S(0));
}

/// r_ij = ReLU(W ReLU(W_u e_i + W_v e_j + b_uv) + b) for one pair of rows.
template <class S>
ad::Var<S> pair_repr(const ad::Var<S>& e_i, const ad::Var<S>& e_j, const ad::ParamSet<S>& params) {
  auto& tape = e_i.tape();
  ad::Var<S> b_uv = params.var(tape, "head.pair.b_uv");
  ad::Var<S> b = params.var(tape, "head.pair.b");
  ad::Var<S> inner = ad::relu(ad::add(ad::linear(e_i, params.var(tape, "head.pair.W_u"), &b_uv),
                                      ad::linear(e_j, params.var(tape, "head.pair.W_v"))));
  return ad::relu(ad::linear(inner, params.var(tape, "head.pair.W"), &b));
}

/// All |V|^2 pair representations, row i*|V| + j holding r_ij.
template <class S>
ad::Var<S> relation_matrix(const ad::Var<S>& states, const ad::ParamSet<S>& params) {
  auto& tape = states.tape();
  const Eigen::Index n = states.rows();
  ad::Var<S> b_uv = params.var(tape, "head.pair.b_uv");
  ad::Var<S> b = params.var(tape, "head.pair.b");
  ad::Var<S> left = ad::linear(states, params.var(tape, "head.pair.W_u"), &b_uv);
  ad::Var<S> right = ad::linear(states, params.var(tape, "head.pair.W_v"));
  std::vector<Eigen::Index> rows_i, rows_j;
  rows_i.reserve(static_cast<std::size_t>(n * n));
  rows_j.reserve(static_cast<std::size_t>(n * n));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      rows_i.push_back(i);
      rows_j.push_back(j);
    }
  }
  ad::Var<S> inner = ad::relu(ad::add(ad::gather_rows(left, std::move(rows_i)), ad::gather_rows(right, std::move(rows_j))));
  return ad::relu(ad::linear(inner, params.var(tape, "head.pair.W"), &b));
}

class AttentionBudgetError : public std::length_error {
 public:
  using std::length_error::length_error;
};

inline const std::vector<Eigen::Index>& all_rows(Eigen::Index n) {
  thread_local std::vector<Eigen::Index> rows;
  rows.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = i;
  return rows;
}

/// Transformer encoder (post-norm, GELU feed-forward) over the flattened
/// relation matrix. `roles` gives each cell's role-pair embedding slot.
/// With `output_rows` the last layer is evaluated for those cells only and
/// the result holds one row per entry in that order; a trace restricted to
/// query cells then needs every query cell among them.
template <class S>
ad::Var<S> cross_path_attend(const ad::Var<S>& cells, const std::vector<Eigen::Index>& roles, const ad::ParamSet<S>& params,
                             const HeadConfig& cfg, AttentionTrace<S>* trace = nullptr,
                             const std::vector<Eigen::Index>* output_rows = nullptr) {
  auto& tape = cells.tape();
  if (cells.rows() > cfg.max_cells) {
    throw AttentionBudgetError("relation matrix has " + std::to_string(cells.rows()) + " cells, above the attention budget of " +
                               std::to_string(cfg.max_cells) + "; lower graph.node_budget");
  }
  if (static_cast<Eigen::Index>(roles.size()) != cells.rows()) throw std::invalid_argument("cross_path_attend: one role slot per cell");
  const S ln_eps = S(1e-5);
  ad::Var<S> x = ad::add(cells, ad::gather_rows(params.var(tape, "head.role_embedding"), roles));
  if (trace) trace->weights.assign(static_cast<std::size_t>(cfg.attn_layers), {});
  if (output_rows && cfg.attn_layers == 0) x = ad::gather_rows(x, *output_rows);
  // Positions of the traced query cells among `output_rows`.
  std::vector<Eigen::Index> last_keep;
  if (output_rows && trace) {
    const std::vector<Eigen::Index>& wanted = trace->full() ? all_rows(cells.rows()) : trace->query_cells;
    for (Eigen::Index c : wanted) {
      auto it = std::find(output_rows->begin(), output_rows->end(), c);
      if (it == output_rows->end()) throw std::invalid_argument("cross_path_attend: traced query cell missing from output_rows");
      last_keep.push_back(static_cast<Eigen::Index>(it - output_rows->begin()));
    }
  }
  for (int l = 0; l < cfg.attn_layers; ++l) {
    const std::string p = "head.attn.l" + std::to_string(l) + ".";
    ad::AttentionWeightsVars<S> w{params.var(tape, p + "q.weight"), params.var(tape, p + "q.bias"),
                                  params.var(tape, p + "k.weight"), params.var(tape, p + "k.bias"),
                                  params.var(tape, p + "v.weight"), params.var(tape, p + "v.bias"),
                                  params.var(tape, p + "o.weight"), params.var(tape, p + "o.bias")};
    std::vector<ad::Matrix<S>>* sink = trace ? &trace->weights[static_cast<std::size_t>(l)] : nullptr;
    const std::vector<Eigen::Index>* keep = (trace && !trace->full()) ? &trace->query_cells : nullptr;
    const bool last = l + 1 == cfg.attn_layers;
    const std::vector<Eigen::Index>* queries = last ? output_rows : nullptr;
    if (queries && sink) keep = &last_keep;
    ad::Var<S> attended = ad::multi_head_self_attention(x, w, cfg.attn_heads, sink, keep, queries);
    ad::Var<S> residual = queries ? ad::gather_rows(x, *queries) : x;
    x = ad::layer_norm_rows(ad::add(residual, attended), params.var(tape, p + "ln1.gamma"), params.var(tape, p + "ln1.beta"), ln_eps);
    ad::Var<S> b_in = params.var(tape, p + "ffn.in.bias");
    ad::Var<S> b_out = params.var(tape, p + "ffn.out.bias");
    ad::Var<S> ff = ad::linear(ad::gelu(ad::linear(x, params.var(tape, p + "ffn.in.weight"), &b_in)),
                               params.var(tape, p + "ffn.out.weight"), &b_out);
    x = ad::layer_norm_rows(ad::add(x, ff), params.var(tape, p + "ln2.gamma"), params.var(tape, p + "ln2.beta"), ln_eps);
  }
  return x;
}

/// Flattened index of cell (TargetHead(k), TargetTail(k)) for every path.
template <class S>
std::vector<Eigen::Index> path_cells(const graph::EntityGraph<S>& g) {
  std::vector<Eigen::Index> rows;
  for (int k = 0; k < g.path_count; ++k) {
    const int h = g.target_head(k);
    const int t = g.target_tail(k);
    if (h < 0 || t < 0) throw std::invalid_argument("path_relation_repr: path " + std::to_string(k) + " lacks a target node");
    rows.push_back(static_cast<Eigen::Index>(h) * g.size() + t);
  }
  return rows;
}

/// Attended cell (TargetHead(k), TargetTail(k)) for every path, stacked.
/// `attended_cells` names the cell of each row of `attended` when it does
/// not cover the whole matrix.
template <class S>
ad::Var<S> path_relation_repr(const ad::Var<S>& attended, const graph::EntityGraph<S>& g,
                              const std::vector<Eigen::Index>* attended_cells = nullptr) {
  std::vector<Eigen::Index> rows = path_cells(g);
  if (attended_cells) {
    for (auto& r : rows) {
      auto it = std::find(attended_cells->begin(), attended_cells->end(), r);
      if (it == attended_cells->end()) throw std::invalid_argument("path_relation_repr: path cell was not attended");
      r = static_cast<Eigen::Index>(it - attended_cells->begin());
    }
  }
  return ad::gather_rows(attended, std::move(rows));
}

/// Two-layer ReLU MLP followed by a softmax over the label space; one row per path.
template <class S>
ad::Var<S> classify_path(const ad::Var<S>& path_reprs, const ad::ParamSet<S>& params) {
  auto& tape = path_reprs.tape();
  ad::Var<S> b1 = params.var(tape, "head.mlp.hidden.bias");
  ad::Var<S> b2 = params.var(tape, "head.mlp.out.bias");
  ad::Var<S> hidden = ad::relu(ad::linear(path_reprs, params.var(tape, "head.mlp.hidden.weight"), &b1));
  return ad::softmax_rows(ad::linear(hidden, params.var(tape, "head.mlp.out.weight"), &b2));
}

/// Bag-level score: componentwise max over path rows, or the whole row of
/// the path with the highest non-NA mass (1 - NA score).
template <class S>
ad::Var<S> bag_pool(const ad::Var<S>& path_scores, PoolMode mode = PoolMode::ComponentwiseMax) {
  if (path_scores.rows() < 1) throw std::invalid_argument("bag_pool: no path scores");
  if (mode == PoolMode::ComponentwiseMax) return ad::max_rows(path_scores);
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < path_scores.rows(); ++k) {
    if (path_scores.value()(k, 0) < path_scores.value()(best, 0)) best = k;
  }
  return ad::slice_rows(path_scores, best, 1);
}

template <class S>
ad::Matrix<S> bag_pool(const ad::Matrix<S>& path_scores, PoolMode mode = PoolMode::ComponentwiseMax) {
  ad::Tape<S> tape(false);
  return bag_pool(tape.constant(path_scores), mode).value();
}

}  // namespace xdre::head

#endif  // XDRE_HEAD_RELATION_HEAD_HPP_
