#ifndef XDRE_GRN_GRN_HPP_
#define XDRE_GRN_GRN_HPP_

// Graph recurrent network: every node state is updated synchronously from
// the unweighted sum of its neighbours' previous states through a GRU cell.
//
//   c_i = sum_{j in A(i)} e_j
//   r   = sigmoid(W_r c + U_r e + b_r)
//   z   = sigmoid(W_z c + U_z e + b_z)
//   u   = tanh(W_u c + U_u (r * e) + b_u)
//   e'  = (1 - z) * u + z * e
//
// Biases are optional (use_bias=false gives the bias-free equations).

#include <random>
#include <stdexcept>
#include <string>

#include "xdre/ad/ops.hpp"
#include "xdre/ad/params.hpp"
#include "xdre/graph/entity_graph.hpp"

namespace xdre::grn {

struct GrnConfig {
  int timesteps = 3;
  bool share_params = true;
  bool use_bias = true;
};

inline std::string param_prefix(const GrnConfig& cfg, int step) {
  return cfg.share_params ? std::string("grn.") : "grn.l" + std::to_string(step) + ".";
}

template <class S>
void init_params(ad::ParamSet<S>& params, int dim, const GrnConfig& cfg, std::mt19937_64& rng) {
  const int sets = cfg.share_params ? 1 : std::max(cfg.timesteps, 1);
  for (int t = 0; t < sets; ++t) {
    const std::string p = param_prefix(cfg, t);
    for (const char* gate : {"r", "z", "u"}) {
      params.add_glorot(p + "W_" + gate, dim, dim, rng);
      params.add_glorot(p + "U_" + gate, dim, dim, rng);
      if (cfg.use_bias) params.add_constant(p + "b_" + gate, 1, dim, S(0));
    }
  }
}

template <class S>
struct GruWeights {
  ad::Var<S> w_r, u_r, w_z, u_z, w_u, u_u;
  ad::Var<S> b_r, b_z, b_u;  // invalid when biases are disabled
};

template <class S>
GruWeights<S> bind_weights(ad::Tape<S>& tape, const ad::ParamSet<S>& params, const GrnConfig& cfg, int step) {
  const std::string p = param_prefix(cfg, step);
  GruWeights<S> w;
  w.w_r = params.var(tape, p + "W_r");
  w.u_r = params.var(tape, p + "U_r");
  w.w_z = params.var(tape, p + "W_z");
  w.u_z = params.var(tape, p + "U_z");
  w.w_u = params.var(tape, p + "W_u");
  w.u_u = params.var(tape, p + "U_u");
  if (cfg.use_bias) {
    w.b_r = params.var(tape, p + "b_r");
    w.b_z = params.var(tape, p + "b_z");
    w.b_u = params.var(tape, p + "b_u");
  }
  return w;
}

/// Row i = sum of the states of node i's neighbours.
template <class S>
ad::Var<S> neighbor_context(const ad::Matrix<S>& adjacency, const ad::Var<S>& states) {
  if (adjacency.rows() != states.rows() || adjacency.cols() != states.rows()) {
    throw std::invalid_argument("neighbor_context: adjacency does not match state count");
  }
  return ad::matmul(states.tape().constant(adjacency), states);
}

/// One GRU update of every row of `prev` given context rows `context`.
template <class S>
ad::Var<S> gru_step(const ad::Var<S>& context, const ad::Var<S>& prev, const GruWeights<S>& w) {
  auto gate = [&](const ad::Var<S>& wc, const ad::Var<S>& ue, const ad::Var<S>& bias, ad::Var<S> second_input) {
    ad::Var<S> pre = ad::add(ad::linear(context, wc), ad::linear(second_input, ue));
    if (bias.valid()) pre = ad::add_row(pre, bias);
    return pre;
  };
  ad::Var<S> r = ad::sigmoid(gate(w.w_r, w.u_r, w.b_r, prev));
  ad::Var<S> z = ad::sigmoid(gate(w.w_z, w.u_z, w.b_z, prev));
  ad::Var<S> u = ad::tanh(gate(w.w_u, w.u_u, w.b_u, ad::mul(r, prev)));
  return ad::add(ad::mul(ad::one_minus(z), u), ad::mul(z, prev));
}

/// Runs `timesteps` synchronous updates; timesteps must be >= 1.
template <class S>
ad::Var<S> encode(const ad::Matrix<S>& adjacency, const ad::Var<S>& init, const ad::ParamSet<S>& params, const GrnConfig& cfg) {
  if (cfg.timesteps < 1) throw std::invalid_argument("grn::encode: timesteps must be >= 1");
  ad::Tape<S>& tape = init.tape();
  ad::Var<S> state = init;
  for (int t = 0; t < cfg.timesteps; ++t) {
    const GruWeights<S> w = bind_weights(tape, params, cfg, cfg.share_params ? 0 : t);
    state = gru_step(neighbor_context(adjacency, state), state, w);
  }
  return state;
}

template <class S>
ad::Var<S> encode(const graph::EntityGraph<S>& g, const ad::Var<S>& init, const ad::ParamSet<S>& params, const GrnConfig& cfg) {
  return encode(g.adjacency_matrix(), init, params, cfg);
}

}  // namespace xdre::grn

#endif  // XDRE_GRN_GRN_HPP_
