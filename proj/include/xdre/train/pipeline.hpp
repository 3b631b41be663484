#ifndef XDRE_TRAIN_PIPELINE_HPP_
#define XDRE_TRAIN_PIPELINE_HPP_

// Glue between configuration, datasets, training phases and checkpoints.

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "xdre/debias/debias.hpp"
#include "xdre/eval/evaluate.hpp"
#include "xdre/model/config.hpp"
#include "xdre/model/model.hpp"
#include "xdre/train/checkpoint.hpp"
#include "xdre/train/trainer.hpp"

namespace xdre::train {

using Real = double;

struct Trained {
  util::Config config;
  std::vector<std::string> vocabulary;
  std::shared_ptr<model::Model<Real>> model;
  debias::AuxClassifier<Real> aux;
  TrainState<Real> state;
  std::vector<double> aux_loss_curve;
};

struct FitCallbacks {
  std::function<void(const TrainState<Real>&, const EpochInfo&)> on_epoch;
  std::function<void(int, double)> on_aux_epoch;
};

/// Built-in defaults overlaid with a serialized configuration.
inline util::Config config_from_text(const std::string& text) {
  util::Config c = default_config();
  c.merge_text(text, "<checkpoint>");
  return c;
}

inline std::vector<std::string> vocabulary_for(const util::Config& cfg, const data::Dataset& train) {
  if (cfg.get_string("encoder.kind") != "toy") return {};
  const auto v = encoder::Vocabulary::from_datasets({&train});
  return {v.tokens().begin() + 1, v.tokens().end()};  // [UNK] is implicit
}

inline std::shared_ptr<model::Model<Real>> make_model(const util::Config& cfg, const data::LabelSpace& labels,
                                                      const std::vector<std::string>& vocabulary) {
  const auto mc = model_config(cfg);
  auto backend = model::make_backend<Real>(mc.encoder, encoder::Vocabulary(vocabulary), static_cast<std::size_t>(mc.budget));
  return std::make_shared<model::Model<Real>>(mc, labels, std::move(backend));
}

inline data::Dataset prepare(const util::Config& cfg, const data::Dataset& ds, std::vector<std::string>* warnings = nullptr) {
  return model::prepare_dataset(ds, static_cast<std::size_t>(cfg.get_int("data.budget")), warnings);
}

/// Phase 1 (main model) and, with `phase2`, the aux classifier. Datasets
/// are raw; markers and filtering are applied here.
inline Trained fit(const util::Config& cfg, const data::Dataset& train_raw, const data::Dataset* dev_raw, bool phase2,
                   const FitCallbacks& cb = {}, const Checkpoint* resume = nullptr, int workers = 1) {
  Trained t;
  t.config = cfg;
  const auto tc = train_config(cfg);
  const data::Dataset train = prepare(cfg, train_raw);
  data::Dataset dev;
  if (dev_raw) dev = prepare(cfg, *dev_raw);
  if (dev_raw && !(dev.label_space == train.label_space)) throw std::invalid_argument("dev set label space differs from the training set");

  TrainState<Real> resume_state;
  if (resume) {
    if (!resume->has_state) throw std::invalid_argument("checkpoint carries no resumable training state");
    if (!(resume->labels == train.label_space)) throw std::invalid_argument("checkpoint label space differs from the training data");
    t.vocabulary = resume->vocabulary;
    resume_state.params = resume->state_params;
    resume_state.optimizer = AdamW<Real>(adamw_config(tc));
    resume_state.optimizer.first_moments() = resume->adam_m.store();
    resume_state.optimizer.second_moments() = resume->adam_v.store();
    resume_state.optimizer.set_steps(resume->adam_steps);
    resume_state.rng = resume->rng;
    resume_state.epoch = resume->epoch;
    resume_state.loss_curve = resume->loss_curve;
    resume_state.dev_curve = resume->dev_curve;
    resume_state.best = resume->model;
    resume_state.best_epoch = resume->best_epoch;
    resume_state.best_score = resume->best_score;
  } else {
    t.vocabulary = vocabulary_for(cfg, train);
  }
  t.model = make_model(cfg, train.label_space, t.vocabulary);
  if (!resume) t.model->init_params(tc.seed);
  t.state = train_main(*t.model, train, dev_raw ? &dev : nullptr, tc, resume ? &resume_state : nullptr, cb.on_epoch, workers);
  if (phase2) {
    const auto res = debias::train_aux(*t.model, train, aux_config(cfg), tc.seed, t.aux, cb.on_aux_epoch);
    t.aux_loss_curve = res.loss_curve;
  }
  return t;
}

inline Checkpoint to_checkpoint(const util::Config& cfg, const std::vector<std::string>& vocabulary, const data::LabelSpace& labels,
                                const ad::ParamSet<Real>& inference_params, const debias::AuxClassifier<Real>* aux,
                                const TrainState<Real>* state, const std::vector<double>& aux_loss_curve = {}) {
  Checkpoint c;
  c.config = cfg.to_text();
  c.labels = labels;
  c.vocabulary = vocabulary;
  c.model = inference_params;
  if (aux && aux->ready()) c.aux = aux->params();
  c.aux_loss_curve = aux_loss_curve;
  if (state) {
    c.has_state = true;
    c.state_params = state->params;
    for (const auto& [k, v] : state->optimizer.first_moments()) c.adam_m.emplace(k, v);
    for (const auto& [k, v] : state->optimizer.second_moments()) c.adam_v.emplace(k, v);
    c.adam_steps = state->optimizer.steps();
    c.rng = state->rng;
    c.epoch = state->epoch;
    c.loss_curve = state->loss_curve;
    c.dev_curve = state->dev_curve;
    c.best_epoch = state->best_epoch;
    c.best_score = state->best_score;
  }
  return c;
}

inline Checkpoint to_checkpoint(const Trained& t) {
  return to_checkpoint(t.config, t.vocabulary, t.model->labels(), t.model->params(), &t.aux, &t.state, t.aux_loss_curve);
}

/// Model (and aux classifier, when present) restored for inference.
/// `overrides` may change inference-only keys such as debias.*.
inline Trained restore(const Checkpoint& c, const std::vector<std::string>& overrides = {}) {
  Trained t;
  t.config = config_from_text(c.config);
  for (const auto& o : overrides) t.config.set_assignment(o);
  t.vocabulary = c.vocabulary;
  const auto mc = model_config(t.config);
  auto backend = model::make_backend<Real>(mc.encoder, encoder::Vocabulary(c.vocabulary), static_cast<std::size_t>(mc.budget));
  t.model = std::make_shared<model::Model<Real>>(mc, c.labels, std::move(backend));
  t.model->params() = c.model;
  if (c.aux.size() > 0) t.aux.params() = c.aux;
  t.aux_loss_curve = c.aux_loss_curve;
  return t;
}

}  // namespace xdre::train

#endif  // XDRE_TRAIN_PIPELINE_HPP_
