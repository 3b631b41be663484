#ifndef XDRE_AD_ATTENTION_HPP_
#define XDRE_AD_ATTENTION_HPP_

#include <cmath>
#include <stdexcept>
#include <vector>

#include "xdre/ad/ops.hpp"

namespace xdre::ad {

template <class S>
struct AttentionWeightsVars {
  Var<S> query_w, query_b, key_w, key_b, value_w, value_b, out_w, out_b;
};

/// Multi-head scaled dot-product self-attention over the rows of `x`.
/// With `query_rows` only those rows attend, and the result holds one row
/// per entry in that order. When `weights` is non-null, the post-softmax
/// weights of every head are appended to it (restricted to `keep_rows`,
/// which index the result rows, if given).
template <class S>
Var<S> multi_head_self_attention(const Var<S>& x, const AttentionWeightsVars<S>& w, int heads,
                                 std::vector<Matrix<S>>* weights = nullptr,
                                 const std::vector<Eigen::Index>* keep_rows = nullptr,
                                 const std::vector<Eigen::Index>* query_rows = nullptr) {
  const Eigen::Index dim = x.cols();
  if (heads < 1 || dim % heads != 0) throw std::invalid_argument("attention: hidden size not divisible by head count");
  const Eigen::Index head_dim = dim / heads;
  const S scale_factor = S(1) / std::sqrt(static_cast<S>(head_dim));

  Var<S> q = linear(query_rows ? gather_rows(x, *query_rows) : x, w.query_w, &w.query_b);
  Var<S> k = linear(x, w.key_w, &w.key_b);
  Var<S> v = linear(x, w.value_w, &w.value_b);

  std::vector<Var<S>> outs;
  outs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    Var<S> qh = slice_cols(q, h * head_dim, head_dim);
    Var<S> kh = slice_cols(k, h * head_dim, head_dim);
    Var<S> vh = slice_cols(v, h * head_dim, head_dim);
    Var<S> probs = softmax_rows(scale(matmul_nt(qh, kh), scale_factor));
    if (weights) {
      if (keep_rows) {
        Matrix<S> sel(static_cast<Eigen::Index>(keep_rows->size()), probs.cols());
        for (std::size_t i = 0; i < keep_rows->size(); ++i) sel.row(static_cast<Eigen::Index>(i)) = probs.value().row((*keep_rows)[i]);
        weights->push_back(std::move(sel));
      } else {
        weights->push_back(probs.value());
      }
    }
    outs.push_back(matmul(probs, vh));
  }
  Var<S> merged = heads == 1 ? outs.front() : concat_cols(outs);
  return linear(merged, w.out_w, &w.out_b);
}

}  // namespace xdre::ad

#endif  // XDRE_AD_ATTENTION_HPP_
