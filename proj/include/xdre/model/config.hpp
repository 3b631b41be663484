#ifndef XDRE_MODEL_CONFIG_HPP_
#define XDRE_MODEL_CONFIG_HPP_

// Every tunable of the pipeline as one layered configuration, plus typed
// views of each module's section.

#include <cstdint>
#include <cstdlib>
#include <string>

#include "xdre/graph/entity_graph.hpp"
#include "xdre/grn/grn.hpp"
#include "xdre/head/relation_head.hpp"
#include "xdre/util/config_file.hpp"

namespace xdre {

/// Environment variable naming a config file merged over the built-in defaults.
inline constexpr const char* kConfigEnv = "XDRE_CONFIG";

inline util::Config default_config() {
  using util::ValueType;
  util::Config c;
  c.declare("encoder.kind", ValueType::String, "toy", "toy | bert");
  c.declare("encoder.checkpoint", ValueType::String, "", "directory with config.json, vocab.txt, model.safetensors");
  c.declare("encoder.hidden_dim", ValueType::Int, "32", "toy backend width");
  c.declare("encoder.mix_scope", ValueType::String, "sentence", "toy recurrence span: sentence | path");
  c.declare("encoder.lowercase", ValueType::Bool, "true", "lowercase input for the bert tokenizer");

  c.declare("data.budget", ValueType::Int, "512", "token budget per text path");

  c.declare("graph.eta", ValueType::Real, "0.6");
  c.declare("graph.node_budget", ValueType::Int, "64");
  c.declare("graph.semantic_edges", ValueType::Bool, "true");
  c.declare("graph.cross_path_semantic_edges", ValueType::Bool, "true");
  c.declare("graph.include_non_bridge", ValueType::Bool, "true");

  c.declare("grn.timesteps", ValueType::Int, "3", "0 skips the GRN");
  c.declare("grn.share_params", ValueType::Bool, "true");
  c.declare("grn.use_bias", ValueType::Bool, "true");

  c.declare("head.attn_layers", ValueType::Int, "2");
  c.declare("head.attn_heads", ValueType::Int, "8");
  c.declare("head.ffn_dim", ValueType::Int, "0", "0 means 4 x hidden");
  c.declare("head.mlp_hidden", ValueType::Int, "0", "0 means hidden");
  c.declare("head.pool", ValueType::String, "componentwise_max", "componentwise_max | best_path");
  c.declare("head.max_cells", ValueType::Int, "4096");

  c.declare("debias.enabled", ValueType::Bool, "true");
  c.declare("debias.lambda", ValueType::Real, "0.1");
  c.declare("debias.mask_rate", ValueType::Real, "0.5");
  c.declare("debias.use_rela", ValueType::Bool, "true");
  c.declare("debias.use_bias", ValueType::Bool, "true");

  c.declare("train.lr", ValueType::Real, "0", "0 picks 1e-3 (toy) or 3e-5 (bert)");
  c.declare("train.epochs", ValueType::Int, "50");
  c.declare("train.batch_size", ValueType::Int, "8");
  c.declare("train.seed", ValueType::Int, "13");
  c.declare("train.grad_clip", ValueType::Real, "1.0", "global norm; 0 disables");
  c.declare("train.weight_decay", ValueType::Real, "0.01");
  c.declare("train.beta1", ValueType::Real, "0.9");
  c.declare("train.beta2", ValueType::Real, "0.999");
  c.declare("train.eps", ValueType::Real, "1e-8");
  c.declare("train.loss_floor", ValueType::Real, "1e-12");

  c.declare("aux.epochs", ValueType::Int, "30");
  c.declare("aux.lr", ValueType::Real, "0.005");
  c.declare("aux.batch_size", ValueType::Int, "8");
  c.declare("aux.hidden", ValueType::Int, "0", "0 means hidden");

  c.declare("eval.workers", ValueType::Int, "1");
  return c;
}

/// Defaults, then $XDRE_CONFIG when set.
inline util::Config base_config() {
  util::Config c = default_config();
  if (const char* env = std::getenv(kConfigEnv); env && *env) c.merge_file(env);
  return c;
}

struct EncoderConfig {
  std::string kind = "toy";
  std::string checkpoint;
  int hidden_dim = 32;
  bool sentence_scope = true;
  bool lowercase = true;
};

struct ModelConfig {
  EncoderConfig encoder;
  int budget = 512;
  graph::GraphConfig graph;
  grn::GrnConfig grn;
  head::HeadConfig head;
};

struct DebiasConfig {
  bool enabled = true;
  double lambda = 0.1;
  double mask_rate = 0.5;
  bool use_rela = true;
  bool use_bias = true;
};

struct TrainConfig {
  double lr = 1e-3;
  int epochs = 50;
  int batch_size = 8;
  std::uint64_t seed = 13;
  double grad_clip = 1.0;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double loss_floor = 1e-12;
};

struct AuxConfig {
  int epochs = 30;
  double lr = 0.005;
  int batch_size = 8;
  int hidden = 0;
};

inline ModelConfig model_config(const util::Config& c) {
  ModelConfig m;
  m.encoder.kind = c.get_string("encoder.kind");
  if (m.encoder.kind != "toy" && m.encoder.kind != "bert") throw util::ConfigError("encoder.kind must be toy or bert");
  m.encoder.checkpoint = c.get_string("encoder.checkpoint");
  m.encoder.hidden_dim = static_cast<int>(c.get_int("encoder.hidden_dim"));
  const std::string scope = c.get_string("encoder.mix_scope");
  if (scope != "sentence" && scope != "path") throw util::ConfigError("encoder.mix_scope must be sentence or path");
  m.encoder.sentence_scope = scope == "sentence";
  m.encoder.lowercase = c.get_bool("encoder.lowercase");
  m.budget = static_cast<int>(c.get_int("data.budget"));
  if (m.budget < 2) throw util::ConfigError("data.budget must be at least 2");

  m.graph.eta = c.get_real("graph.eta");
  m.graph.node_budget = static_cast<int>(c.get_int("graph.node_budget"));
  m.graph.semantic_edges = c.get_bool("graph.semantic_edges");
  m.graph.cross_path_semantic_edges = c.get_bool("graph.cross_path_semantic_edges");
  m.graph.include_non_bridge = c.get_bool("graph.include_non_bridge");

  m.grn.timesteps = static_cast<int>(c.get_int("grn.timesteps"));
  if (m.grn.timesteps < 0) throw util::ConfigError("grn.timesteps must be >= 0");
  m.grn.share_params = c.get_bool("grn.share_params");
  m.grn.use_bias = c.get_bool("grn.use_bias");

  m.head.attn_layers = static_cast<int>(c.get_int("head.attn_layers"));
  m.head.attn_heads = static_cast<int>(c.get_int("head.attn_heads"));
  m.head.ffn_dim = static_cast<int>(c.get_int("head.ffn_dim"));
  m.head.mlp_hidden = static_cast<int>(c.get_int("head.mlp_hidden"));
  const std::string pool = c.get_string("head.pool");
  if (pool == "componentwise_max") {
    m.head.pool = head::PoolMode::ComponentwiseMax;
  } else if (pool == "best_path") {
    m.head.pool = head::PoolMode::BestPath;
  } else {
    throw util::ConfigError("head.pool must be componentwise_max or best_path");
  }
  m.head.max_cells = static_cast<int>(c.get_int("head.max_cells"));
  if (m.head.attn_layers < 0 || m.head.attn_heads < 1) throw util::ConfigError("head.attn_layers >= 0 and head.attn_heads >= 1 required");
  return m;
}

inline DebiasConfig debias_config(const util::Config& c) {
  DebiasConfig d;
  d.enabled = c.get_bool("debias.enabled");
  d.lambda = c.get_real("debias.lambda");
  d.mask_rate = c.get_real("debias.mask_rate");
  d.use_rela = c.get_bool("debias.use_rela");
  d.use_bias = c.get_bool("debias.use_bias");
  if (d.lambda < 0) throw util::ConfigError("debias.lambda must be >= 0");
  if (d.mask_rate < 0 || d.mask_rate > 1) throw util::ConfigError("debias.mask_rate must lie in [0, 1]");
  return d;
}

inline TrainConfig train_config(const util::Config& c) {
  TrainConfig t;
  t.lr = c.get_real("train.lr");
  if (t.lr == 0) t.lr = c.get_string("encoder.kind") == "bert" ? 3e-5 : 1e-3;
  t.epochs = static_cast<int>(c.get_int("train.epochs"));
  t.batch_size = static_cast<int>(c.get_int("train.batch_size"));
  t.seed = static_cast<std::uint64_t>(c.get_int("train.seed"));
  t.grad_clip = c.get_real("train.grad_clip");
  t.weight_decay = c.get_real("train.weight_decay");
  t.beta1 = c.get_real("train.beta1");
  t.beta2 = c.get_real("train.beta2");
  t.eps = c.get_real("train.eps");
  t.loss_floor = c.get_real("train.loss_floor");
  if (t.lr <= 0) throw util::ConfigError("train.lr must be > 0");
  if (t.epochs < 1) throw util::ConfigError("train.epochs must be >= 1");
  if (t.batch_size < 1) throw util::ConfigError("train.batch_size must be >= 1");
  return t;
}

inline AuxConfig aux_config(const util::Config& c) {
  AuxConfig a;
  a.epochs = static_cast<int>(c.get_int("aux.epochs"));
  a.lr = c.get_real("aux.lr");
  a.batch_size = static_cast<int>(c.get_int("aux.batch_size"));
  a.hidden = static_cast<int>(c.get_int("aux.hidden"));
  if (a.epochs < 1 || a.lr <= 0 || a.batch_size < 1) throw util::ConfigError("aux.epochs, aux.lr and aux.batch_size must be positive");
  return a;
}

}  // namespace xdre

#endif  // XDRE_MODEL_CONFIG_HPP_
