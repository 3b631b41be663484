#ifndef XDRE_AD_OPS_HPP_
#define XDRE_AD_OPS_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "xdre/ad/tape.hpp"

namespace xdre::ad {

namespace detail {

template <class S>
inline void check_same_shape(const Var<S>& a, const Var<S>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

template <class S>
inline S stable_sigmoid(S x) {
  using std::exp;
  if (x >= S(0)) return S(1) / (S(1) + exp(-x));
  const S e = exp(x);
  return e / (S(1) + e);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic

template <class S>
Var<S> add(const Var<S>& a, const Var<S>& b) {
  detail::check_same_shape(a, b, "add");
  return a.tape().record(a.value() + b.value(), {a, b}, [a, b](const Matrix<S>& g) {
    if (a.needs_grad()) a.add_grad(g);
    if (b.needs_grad()) b.add_grad(g);
  });
}

template <class S>
Var<S> sub(const Var<S>& a, const Var<S>& b) {
  detail::check_same_shape(a, b, "sub");
  return a.tape().record(a.value() - b.value(), {a, b}, [a, b](const Matrix<S>& g) {
    if (a.needs_grad()) a.add_grad(g);
    if (b.needs_grad()) b.grad() -= g;
  });
}

template <class S>
Var<S> mul(const Var<S>& a, const Var<S>& b) {
  detail::check_same_shape(a, b, "mul");
  return a.tape().record(a.value().cwiseProduct(b.value()), {a, b}, [a, b](const Matrix<S>& g) {
    if (a.needs_grad()) a.add_grad(g.cwiseProduct(b.value()));
    if (b.needs_grad()) b.add_grad(g.cwiseProduct(a.value()));
  });
}

template <class S>
Var<S> scale(const Var<S>& a, S factor) {
  return a.tape().record(a.value() * factor, {a}, [a, factor](const Matrix<S>& g) { a.add_grad(g * factor); });
}

/// 1 - a
template <class S>
Var<S> one_minus(const Var<S>& a) {
  Matrix<S> out = (-a.value().array() + S(1)).matrix();
  return a.tape().record(std::move(out), {a}, [a](const Matrix<S>& g) { a.grad() -= g; });
}

/// Adds a 1 x cols row vector to every row of `a`.
template <class S>
Var<S> add_row(const Var<S>& a, const Var<S>& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("add_row: shape mismatch");
  Matrix<S> out = a.value();
  out.rowwise() += row.value().row(0);
  return a.tape().record(std::move(out), {a, row}, [a, row](const Matrix<S>& g) {
    if (a.needs_grad()) a.add_grad(g);
    if (row.needs_grad()) row.add_grad(g.colwise().sum());
  });
}

// ---------------------------------------------------------------------------
// Products

template <class S>
Var<S> matmul(const Var<S>& a, const Var<S>& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  Matrix<S> out = a.value() * b.value();
  return a.tape().record(std::move(out), {a, b}, [a, b](const Matrix<S>& g) {
    if (a.needs_grad()) a.add_grad(g * b.value().transpose());
    if (b.needs_grad()) b.add_grad(a.value().transpose() * g);
  });
}

/// a * b^T
template <class S>
Var<S> matmul_nt(const Var<S>& a, const Var<S>& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("matmul_nt: inner dimension mismatch");
  Matrix<S> out = a.value() * b.value().transpose();
  return a.tape().record(std::move(out), {a, b}, [a, b](const Matrix<S>& g) {
    if (a.needs_grad()) a.add_grad(g * b.value());
    if (b.needs_grad()) b.add_grad(g.transpose() * a.value());
  });
}

/// x W^T (+ bias), with W stored as [out x in] and bias as [1 x out].
template <class S>
Var<S> linear(const Var<S>& x, const Var<S>& weight, const Var<S>* bias = nullptr) {
  if (x.cols() != weight.cols()) throw std::invalid_argument("linear: input width mismatch");
  Matrix<S> out = x.value() * weight.value().transpose();
  if (bias) {
    if (bias->rows() != 1 || bias->cols() != weight.rows()) throw std::invalid_argument("linear: bias shape");
    out.rowwise() += bias->value().row(0);
    const Var<S> b = *bias;
    return x.tape().record(std::move(out), {x, weight, b}, [x, weight, b](const Matrix<S>& g) {
      if (x.needs_grad()) x.add_grad(g * weight.value());
      if (weight.needs_grad()) weight.add_grad(g.transpose() * x.value());
      if (b.needs_grad()) b.add_grad(g.colwise().sum());
    });
  }
  return x.tape().record(std::move(out), {x, weight}, [x, weight](const Matrix<S>& g) {
    if (x.needs_grad()) x.add_grad(g * weight.value());
    if (weight.needs_grad()) weight.add_grad(g.transpose() * x.value());
  });
}

// ---------------------------------------------------------------------------
// Nonlinearities

template <class S>
Var<S> sigmoid(const Var<S>& a) {
  Matrix<S> out = a.value().unaryExpr([](S v) { return detail::stable_sigmoid(v); });
  const int self = static_cast<int>(a.tape().size());
  Tape<S>* tape = &a.tape();
  return a.tape().record(std::move(out), {a}, [a, tape, self](const Matrix<S>& g) {
    const Matrix<S>& y = tape->value(self);
    a.grad().array() += g.array() * y.array() * (S(1) - y.array());
  });
}

template <class S>
Var<S> tanh(const Var<S>& a) {
  Matrix<S> out = a.value().array().tanh().matrix();
  const int self = static_cast<int>(a.tape().size());
  Tape<S>* tape = &a.tape();
  return a.tape().record(std::move(out), {a}, [a, tape, self](const Matrix<S>& g) {
    const Matrix<S>& y = tape->value(self);
    a.grad().array() += g.array() * (S(1) - y.array().square());
  });
}

template <class S>
Var<S> relu(const Var<S>& a) {
  Matrix<S> out = a.value().cwiseMax(S(0));
  return a.tape().record(std::move(out), {a}, [a](const Matrix<S>& g) {
    a.grad().array() += (a.value().array() > S(0)).select(g.array(), S(0));
  });
}

/// Exact (erf-based) GELU.
template <class S>
Var<S> gelu(const Var<S>& a) {
  using std::erf;
  const S inv_sqrt2 = S(1) / std::sqrt(S(2));
  Matrix<S> out = a.value().unaryExpr([inv_sqrt2](S v) { return S(0.5) * v * (S(1) + erf(v * inv_sqrt2)); });
  return a.tape().record(std::move(out), {a}, [a, inv_sqrt2](const Matrix<S>& g) {
    using std::exp;
    const S inv_sqrt_2pi = S(1) / std::sqrt(S(2) * std::numbers::pi_v<S>);
    auto d = a.value().unaryExpr([&](S v) {
      return S(0.5) * (S(1) + erf(v * inv_sqrt2)) + v * inv_sqrt_2pi * exp(S(-0.5) * v * v);
    });
    a.grad().array() += g.array() * d.array();
  });
}

// ---------------------------------------------------------------------------
// Row-structured reductions

/// Numerically stable softmax of each row.
template <class S>
Matrix<S> softmax_rows_value(const Matrix<S>& x) {
  Matrix<S> out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const S m = x.row(r).maxCoeff();
    out.row(r) = (x.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

template <class S>
Var<S> softmax_rows(const Var<S>& a) {
  Matrix<S> out = softmax_rows_value(a.value());
  const int self = static_cast<int>(a.tape().size());
  Tape<S>* tape = &a.tape();
  return a.tape().record(std::move(out), {a}, [a, tape, self](const Matrix<S>& g) {
    const Matrix<S>& y = tape->value(self);
    Eigen::Matrix<S, Eigen::Dynamic, 1> dots = g.cwiseProduct(y).rowwise().sum();
    Matrix<S> ga = y.cwiseProduct(g);
    ga -= (y.array().colwise() * dots.array()).matrix();
    a.add_grad(ga);
  });
}

/// Column-wise max over rows [begin, end); returns 1 x cols.
template <class S>
Var<S> max_rows(const Var<S>& a, Eigen::Index begin, Eigen::Index end) {
  if (begin < 0 || end > a.rows() || begin >= end) throw std::invalid_argument("max_rows: empty or invalid row range");
  const auto& v = a.value();
  Matrix<S> out(1, v.cols());
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(v.cols()));
  for (Eigen::Index c = 0; c < v.cols(); ++c) {
    Eigen::Index best = begin;
    for (Eigen::Index r = begin + 1; r < end; ++r) {
      if (v(r, c) > v(best, c)) best = r;
    }
    arg[static_cast<std::size_t>(c)] = best;
    out(0, c) = v(best, c);
  }
  return a.tape().record(std::move(out), {a}, [a, arg = std::move(arg)](const Matrix<S>& g) {
    auto& ga = a.grad();
    for (std::size_t c = 0; c < arg.size(); ++c) ga(arg[c], static_cast<Eigen::Index>(c)) += g(0, static_cast<Eigen::Index>(c));
  });
}

template <class S>
Var<S> max_rows(const Var<S>& a) {
  return max_rows(a, 0, a.rows());
}

/// Column-wise log-sum-exp over all rows with max shift; returns 1 x cols.
template <class S>
Matrix<S> logsumexp_rows_value(const Matrix<S>& x) {
  using std::exp;
  using std::log;
  Matrix<S> out(1, x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const S m = x.col(c).maxCoeff();
    S acc = S(0);
    for (Eigen::Index r = 0; r < x.rows(); ++r) acc += exp(x(r, c) - m);
    out(0, c) = m + log(acc);
  }
  return out;
}

template <class S>
Var<S> logsumexp_rows(const Var<S>& a) {
  if (a.rows() == 0) throw std::invalid_argument("logsumexp_rows: no rows");
  Matrix<S> out = logsumexp_rows_value(a.value());
  const int self = static_cast<int>(a.tape().size());
  Tape<S>* tape = &a.tape();
  return a.tape().record(std::move(out), {a}, [a, tape, self](const Matrix<S>& g) {
    const Matrix<S>& y = tape->value(self);
    Matrix<S> w = (a.value().rowwise() - y.row(0)).array().exp().matrix();
    a.grad().array() += (w.array().rowwise() * g.row(0).array());
  });
}

/// Layer normalization of each row with learned gain and offset (1 x cols each).
template <class S>
Var<S> layer_norm_rows(const Var<S>& x, const Var<S>& gamma, const Var<S>& beta, S eps) {
  using std::sqrt;
  const auto& v = x.value();
  const Eigen::Index n = v.cols();
  Matrix<S> xhat(v.rows(), n);
  Eigen::Matrix<S, Eigen::Dynamic, 1> inv_std(v.rows());
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    const S mean = v.row(r).mean();
    const S var = (v.row(r).array() - mean).square().mean();
    inv_std(r) = S(1) / sqrt(var + eps);
    xhat.row(r) = (v.row(r).array() - mean) * inv_std(r);
  }
  Matrix<S> out = xhat.array().rowwise() * gamma.value().row(0).array();
  out.rowwise() += beta.value().row(0);
  return x.tape().record(std::move(out), {x, gamma, beta},
                         [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std), n](const Matrix<S>& g) {
                           if (gamma.needs_grad()) gamma.add_grad(g.cwiseProduct(xhat).colwise().sum());
                           if (beta.needs_grad()) beta.add_grad(g.colwise().sum());
                           if (!x.needs_grad()) return;
                           Matrix<S> gx = g.array().rowwise() * gamma.value().row(0).array();
                           auto& out_grad = x.grad();
                           for (Eigen::Index r = 0; r < gx.rows(); ++r) {
                             const S mean_g = gx.row(r).mean();
                             const S mean_gx = gx.row(r).cwiseProduct(xhat.row(r)).sum() / S(n);
                             out_grad.row(r).array() +=
                                 inv_std(r) * (gx.row(r).array() - mean_g - xhat.row(r).array() * mean_gx);
                           }
                         });
}

// ---------------------------------------------------------------------------
// Shape manipulation

template <class S>
Var<S> gather_rows(const Var<S>& a, std::vector<Eigen::Index> index) {
  const auto& v = a.value();
  Matrix<S> out(static_cast<Eigen::Index>(index.size()), v.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= v.rows()) throw std::out_of_range("gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = v.row(index[i]);
  }
  return a.tape().record(std::move(out), {a}, [a, index = std::move(index)](const Matrix<S>& g) {
    auto& ga = a.grad();
    for (std::size_t i = 0; i < index.size(); ++i) ga.row(index[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

template <class S>
Var<S> slice_rows(const Var<S>& a, Eigen::Index begin, Eigen::Index count) {
  if (begin < 0 || count < 0 || begin + count > a.rows()) throw std::out_of_range("slice_rows");
  Matrix<S> out = a.value().middleRows(begin, count);
  return a.tape().record(std::move(out), {a}, [a, begin, count](const Matrix<S>& g) {
    a.grad().middleRows(begin, count) += g;
  });
}

template <class S>
Var<S> slice_cols(const Var<S>& a, Eigen::Index begin, Eigen::Index count) {
  if (begin < 0 || count < 0 || begin + count > a.cols()) throw std::out_of_range("slice_cols");
  Matrix<S> out = a.value().middleCols(begin, count);
  return a.tape().record(std::move(out), {a}, [a, begin, count](const Matrix<S>& g) {
    a.grad().middleCols(begin, count) += g;
  });
}

template <class S>
Var<S> concat_rows(const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts.front().cols();
  for (const auto& p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("concat_rows: width mismatch");
    rows += p.rows();
  }
  Matrix<S> out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return parts.front().tape().record(std::move(out), parts, [parts](const Matrix<S>& g) {
    Eigen::Index offset = 0;
    for (const auto& p : parts) {
      if (p.needs_grad()) p.add_grad(g.middleRows(offset, p.rows()));
      offset += p.rows();
    }
  });
}

template <class S>
Var<S> concat_cols(const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  Eigen::Index cols = 0;
  const Eigen::Index rows = parts.front().rows();
  for (const auto& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("concat_cols: height mismatch");
    cols += p.cols();
  }
  Matrix<S> out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return parts.front().tape().record(std::move(out), parts, [parts](const Matrix<S>& g) {
    Eigen::Index offset = 0;
    for (const auto& p : parts) {
      if (p.needs_grad()) p.add_grad(g.middleCols(offset, p.cols()));
      offset += p.cols();
    }
  });
}

// ---------------------------------------------------------------------------
// Recurrences and losses

/// Elman recurrence h_t = tanh(pre_t + h_{t-1} U^T), restarted with h = 0 at
/// every segment start. `segments` holds [begin, end) row ranges; rows outside
/// every segment are left zero. `reverse` scans each segment back to front.
template <class S>
Var<S> tanh_recurrence(const Var<S>& pre, const Var<S>& recurrent,
                       std::vector<std::pair<Eigen::Index, Eigen::Index>> segments, bool reverse) {
  const auto& x = pre.value();
  const auto& u = recurrent.value();
  const Eigen::Index d = x.cols();
  if (u.rows() != d || u.cols() != d) throw std::invalid_argument("tanh_recurrence: recurrent matrix shape");
  Matrix<S> h = Matrix<S>::Zero(x.rows(), d);
  for (const auto& [b, e] : segments) {
    Matrix<S> prev = Matrix<S>::Zero(1, d);
    for (Eigen::Index s = 0; s < e - b; ++s) {
      const Eigen::Index t = reverse ? e - 1 - s : b + s;
      h.row(t) = (x.row(t) + prev * u.transpose()).array().tanh().matrix();
      prev = h.row(t);
    }
  }
  const int self = static_cast<int>(pre.tape().size());
  Tape<S>* tape = &pre.tape();
  return pre.tape().record(std::move(h), {pre, recurrent},
                           [pre, recurrent, tape, self, segments = std::move(segments), reverse](const Matrix<S>& g) {
                             const Matrix<S>& hv = tape->value(self);
                             const auto& uv = recurrent.value();
                             const Eigen::Index dim = hv.cols();
                             Matrix<S> gu = Matrix<S>::Zero(dim, dim);
                             Matrix<S> gpre = Matrix<S>::Zero(hv.rows(), dim);
                             for (const auto& [b, e] : segments) {
                               Matrix<S> carry = Matrix<S>::Zero(1, dim);
                               for (Eigen::Index s = e - b - 1; s >= 0; --s) {
                                 const Eigen::Index t = reverse ? e - 1 - s : b + s;
                                 Matrix<S> dh = g.row(t) + carry;
                                 Matrix<S> da = (dh.array() * (S(1) - hv.row(t).array().square())).matrix();
                                 gpre.row(t) = da;
                                 if (s > 0) {
                                   const Eigen::Index prev_t = reverse ? t + 1 : t - 1;
                                   gu.noalias() += da.transpose() * hv.row(prev_t);
                                 }
                                 carry = da * uv;
                               }
                             }
                             if (pre.needs_grad()) pre.add_grad(gpre);
                             if (recurrent.needs_grad()) recurrent.add_grad(gu);
                           });
}

/// Sum of all entries of a weighted by a constant matrix; 1x1 result.
template <class S>
Var<S> weighted_sum(const Var<S>& a, const Matrix<S>& weights) {
  if (weights.rows() != a.rows() || weights.cols() != a.cols()) throw std::invalid_argument("weighted_sum: shape");
  Matrix<S> out(1, 1);
  out(0, 0) = a.value().cwiseProduct(weights).sum();
  return a.tape().record(std::move(out), {a}, [a, weights](const Matrix<S>& g) { a.add_grad(weights * g(0, 0)); });
}

template <class S>
Var<S> sum_scalars(const std::vector<Var<S>>& terms) {
  if (terms.empty()) throw std::invalid_argument("sum_scalars: no terms");
  Matrix<S> out = Matrix<S>::Zero(1, 1);
  for (const auto& t : terms) out(0, 0) += t.value()(0, 0);
  return terms.front().tape().record(std::move(out), terms, [terms](const Matrix<S>& g) {
    for (const auto& t : terms) {
      if (t.needs_grad()) t.grad()(0, 0) += g(0, 0);
    }
  });
}

/// Cross-entropy of a non-negative score row against target classes. The row
/// is renormalized to sum one inside the loss and each probability floored at
/// `floor` before the log; one term per target class.
template <class S>
Var<S> normalized_nll(const Var<S>& scores, std::vector<int> targets, S floor) {
  using std::log;
  if (scores.rows() != 1) throw std::invalid_argument("normalized_nll: expects a single row");
  if (targets.empty()) throw std::invalid_argument("normalized_nll: no targets");
  const auto& p = scores.value();
  const S total = p.sum();
  Matrix<S> out = Matrix<S>::Zero(1, 1);
  for (int t : targets) {
    const S q = p(0, t) / total;
    out(0, 0) -= log(std::max(q, floor));
  }
  return scores.tape().record(std::move(out), {scores}, [scores, targets = std::move(targets), floor, total](const Matrix<S>& g) {
    const auto& pv = scores.value();
    auto& gs = scores.grad();
    for (int t : targets) {
      if (pv(0, t) / total <= floor) continue;
      gs.array() += g(0, 0) / total;
      gs(0, t) -= g(0, 0) / pv(0, t);
    }
  });
}

}  // namespace xdre::ad

#endif  // XDRE_AD_OPS_HPP_
