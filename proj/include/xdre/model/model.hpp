#ifndef XDRE_MODEL_MODEL_HPP_
#define XDRE_MODEL_MODEL_HPP_

// End-to-end forward pass: encode each path, build the entity graph, run the
// GRN, attend across the relation matrix and pool per-path scores per bag.

#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "xdre/ad/ops.hpp"
#include "xdre/ad/params.hpp"
#include "xdre/data/preprocess.hpp"
#include "xdre/data/types.hpp"
#include "xdre/encoder/backend.hpp"
#include "xdre/encoder/bert.hpp"
#include "xdre/encoder/toy.hpp"
#include "xdre/graph/entity_graph.hpp"
#include "xdre/grn/grn.hpp"
#include "xdre/head/relation_head.hpp"
#include "xdre/model/config.hpp"

namespace xdre::model {

/// Encoder outputs of one bag: per-path entity vectors on a tape plus their values.
template <class S>
struct BagEncoding {
  std::vector<std::map<std::string, ad::Var<S>>> entity_vars;
  graph::PathReprs<S> reprs;
};

template <class S>
struct Forward {
  graph::EntityGraph<S> graph;
  ad::Var<S> init;         // |V| x d
  ad::Var<S> states;       // |V| x d after the GRN
  ad::Var<S> path_reprs;   // N x d, rows r^k
  ad::Var<S> path_scores;  // N x |labels|
  ad::Var<S> pooled;       // 1 x |labels|
  head::AttentionTrace<S> trace;
  std::vector<std::string> warnings;
};

/// Entity markers, then filtering to the path budget (markers count towards it).
inline data::DocumentBag prepare_bag(const data::DocumentBag& bag, std::size_t budget, std::vector<std::string>* warnings = nullptr) {
  return data::filter_context(data::insert_markers(bag), budget, warnings);
}

inline data::Dataset prepare_dataset(const data::Dataset& ds, std::size_t budget, std::vector<std::string>* warnings = nullptr) {
  data::Dataset out = ds;
  for (auto& bag : out.bags) bag = prepare_bag(bag, budget, warnings);
  return out;
}

template <class S>
class Model {
 public:
  Model(ModelConfig cfg, data::LabelSpace labels, std::shared_ptr<const encoder::EncoderBackend<S>> backend)
      : cfg_(std::move(cfg)), labels_(std::move(labels)), backend_(std::move(backend)) {
    if (!backend_) throw std::invalid_argument("model needs an encoder backend");
    labels_.validate();
  }

  /// Fresh parameters for every module, drawn from one seeded stream.
  void init_params(std::uint64_t seed) {
    params_ = {};
    std::mt19937_64 rng(seed);
    backend_->init_params(params_, rng);
    const int d = backend_->hidden_dim();
    if (cfg_.grn.timesteps > 0) grn::init_params(params_, d, cfg_.grn, rng);
    head::init_params(params_, d, labels_.size(), cfg_.head, rng);
  }

  const ModelConfig& config() const { return cfg_; }
  const data::LabelSpace& labels() const { return labels_; }
  const encoder::EncoderBackend<S>& backend() const { return *backend_; }
  std::shared_ptr<const encoder::EncoderBackend<S>> backend_ptr() const { return backend_; }
  int hidden_dim() const { return backend_->hidden_dim(); }
  ad::ParamSet<S>& params() { return params_; }
  const ad::ParamSet<S>& params() const { return params_; }

  BagEncoding<S> encode_bag(ad::Tape<S>& tape, const data::DocumentBag& bag) const {
    BagEncoding<S> enc;
    for (const auto& path : bag.paths) {
      const auto flat = encoder::flatten_path(path);
      ad::Var<S> tokens = encoder::encode_path(tape, params_, *backend_, flat);
      std::map<std::string, ad::Var<S>> vars;
      std::map<std::string, ad::Matrix<S>> values;
      for (const auto& [entity, spans] : flat.mentions) {
        std::vector<ad::Var<S>> mentions;
        mentions.reserve(spans.size());
        for (const auto& span : spans) mentions.push_back(encoder::mention_repr(tokens, span));
        ad::Var<S> v = encoder::entity_path_repr(mentions);
        values.emplace(entity, v.value());
        vars.emplace(entity, v);
      }
      enc.entity_vars.push_back(std::move(vars));
      enc.reprs.push_back(std::move(values));
    }
    return enc;
  }

  graph::EntityGraph<S> build_graph(const data::DocumentBag& bag, const BagEncoding<S>& enc,
                                    std::vector<std::string>* warnings = nullptr) const {
    return graph::build_graph(bag, enc.reprs, cfg_.graph, warnings);
  }

  /// GRN and relation head over a given graph. With `keep_trace`, attention
  /// rows of every query cell that involves a target node are recorded.
  /// `target_queries` evaluates that same query set without recording it.
  Forward<S> run([[maybe_unused]] ad::Tape<S>& tape, const BagEncoding<S>& enc, graph::EntityGraph<S> g, bool keep_trace = false,
                 bool target_queries = false) const {
    Forward<S> f;
    f.graph = std::move(g);
    const auto& nodes = f.graph.nodes;
    std::vector<ad::Var<S>> rows;
    rows.reserve(nodes.size());
    for (const auto& n : nodes) {
      if (n.role.is_target()) {
        rows.push_back(enc.entity_vars[static_cast<std::size_t>(n.role.path)].at(n.entity));
      } else {
        std::vector<ad::Var<S>> per_path;
        for (int k : n.paths) per_path.push_back(enc.entity_vars[static_cast<std::size_t>(k)].at(n.entity));
        rows.push_back(ad::logsumexp_rows(per_path.size() == 1 ? per_path.front() : ad::concat_rows(per_path)));
      }
    }
    f.init = ad::concat_rows(rows);
    f.states = cfg_.grn.timesteps > 0 ? grn::encode(f.graph, f.init, params_, cfg_.grn) : f.init;

    const int n = f.graph.size();
    std::vector<Eigen::Index> roles;
    roles.reserve(static_cast<std::size_t>(n * n));
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) roles.push_back(head::role_pair_index(f.graph, i, j));
    }
    std::vector<Eigen::Index> target_cells;
    if (keep_trace || target_queries) {
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          if (nodes[static_cast<std::size_t>(i)].role.is_target() || nodes[static_cast<std::size_t>(j)].role.is_target()) {
            target_cells.push_back(static_cast<Eigen::Index>(i) * n + j);
          }
        }
      }
    }
    head::AttentionTrace<S>* trace = nullptr;
    if (keep_trace) {
      f.trace.node_count = n;
      f.trace.query_cells = target_cells;
      trace = &f.trace;
    }
    ad::Var<S> cells = head::relation_matrix(f.states, params_);
    // Only the path cells (and traced cells) of the last layer are read.
    const std::vector<Eigen::Index> wanted = target_cells.empty() ? head::path_cells(f.graph) : target_cells;
    ad::Var<S> attended = head::cross_path_attend(cells, roles, params_, cfg_.head, trace, &wanted);
    f.path_reprs = head::path_relation_repr(attended, f.graph, &wanted);
    f.path_scores = head::classify_path(f.path_reprs, params_);
    f.pooled = head::bag_pool(f.path_scores, cfg_.head.pool);
    return f;
  }

  Forward<S> forward(ad::Tape<S>& tape, const data::DocumentBag& bag, bool keep_trace = false, bool target_queries = false) const {
    std::vector<std::string> warnings;
    BagEncoding<S> enc = encode_bag(tape, bag);
    Forward<S> f = run(tape, enc, build_graph(bag, enc, &warnings), keep_trace, target_queries);
    f.warnings = std::move(warnings);
    return f;
  }

  /// Cross-entropy of the renormalized pooled scores, one term per gold label.
  ad::Var<S> loss(const Forward<S>& f, const data::DocumentBag& bag, double floor = 1e-12) const {
    return ad::normalized_nll(f.pooled, bag.labels, static_cast<S>(floor));
  }

  /// Pooled bag scores without recording gradients. Evaluates the traced
  /// query set so the result is bitwise equal to the debiasing pass's y.
  ad::Matrix<S> predict(const data::DocumentBag& bag) const {
    ad::Tape<S> tape(false);
    return forward(tape, bag, false, true).pooled.value();
  }

 private:
  ModelConfig cfg_;
  data::LabelSpace labels_;
  std::shared_ptr<const encoder::EncoderBackend<S>> backend_;
  ad::ParamSet<S> params_;
};

/// Encoder backend described by `cfg`. The toy backend needs the vocabulary.
template <class S>
std::shared_ptr<const encoder::EncoderBackend<S>> make_backend(const EncoderConfig& cfg, const encoder::Vocabulary& vocab,
                                                               std::size_t budget) {
  if (cfg.kind == "toy") {
    if (cfg.hidden_dim < 1) throw util::ConfigError("encoder.hidden_dim must be >= 1");
    return std::make_shared<encoder::ToyEncoder<S>>(vocab, cfg.hidden_dim, cfg.sentence_scope, budget + 1);
  }
  if (cfg.kind == "bert") {
    if (cfg.checkpoint.empty()) throw util::ConfigError("encoder.kind = bert requires encoder.checkpoint");
    return std::make_shared<encoder::BertEncoder<S>>(cfg.checkpoint, cfg.lowercase);
  }
  throw util::ConfigError("unknown encoder.kind '" + cfg.kind + "'");
}

}  // namespace xdre::model

#endif  // XDRE_MODEL_MODEL_HPP_
