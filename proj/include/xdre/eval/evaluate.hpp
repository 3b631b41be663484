#ifndef XDRE_EVAL_EVALUATE_HPP_
#define XDRE_EVAL_EVALUATE_HPP_

#include <stdexcept>
#include <string>
#include <vector>

#include "xdre/debias/debias.hpp"
#include "xdre/eval/metrics.hpp"
#include "xdre/model/model.hpp"
#include "xdre/util/parallel.hpp"

namespace xdre::eval {

/// All score vectors of one bag. y_rela / y_bias are empty when not computed.
template <class S>
struct ScoredBag {
  std::string bag_id;
  std::vector<int> gold;
  ad::Matrix<S> y;
  ad::Matrix<S> y_rela;
  ad::Matrix<S> y_bias;
  ad::Matrix<S> calibrated;
  int masked = 0;
};

/// Scores every bag (in parallel over `workers` threads). With debiasing
/// enabled, a disabled term (use_rela / use_bias false) enters the
/// calibration as a zero vector.
template <class S>
std::vector<ScoredBag<S>> score_dataset(const model::Model<S>& m, const debias::AuxClassifier<S>* aux, const data::Dataset& ds,
                                        const DebiasConfig& cfg, int workers = 1) {
  if (!(ds.label_space == m.labels())) throw std::invalid_argument("dataset label space differs from the model's label space");
  const bool need_rela = cfg.enabled && cfg.use_rela;
  if (need_rela && (!aux || !aux->ready())) {
    throw std::invalid_argument("debias.enabled with debias.use_rela needs a phase-2 checkpoint (train --phase2) or --debias off");
  }
  if (aux && aux->ready() && aux->output_width() != m.labels().size() - 1) throw std::invalid_argument("aux classifier width does not match the label space");
  std::vector<ScoredBag<S>> out(ds.bags.size());
  util::parallel_for(ds.bags.size(), workers, [&](std::size_t i) {
    const auto& bag = ds.bags[i];
    ScoredBag<S> s;
    s.bag_id = bag.id;
    s.gold = bag.labels;
    if (!cfg.enabled) {
      s.y = m.predict(bag);
      s.calibrated = s.y;
    } else {
      const auto pass = debias::bias_pass(m, bag, cfg.mask_rate);
      s.y = pass.y;
      s.y_bias = pass.y_bias;
      s.masked = pass.masked;
      if (aux && aux->ready()) s.y_rela = aux->predict_rela(pass.path_reprs);
      const ad::Matrix<S> zero = ad::Matrix<S>::Zero(1, s.y.cols());
      s.calibrated = debias::calibrate(s.y, cfg.use_rela ? s.y_rela : zero, cfg.use_bias ? s.y_bias : zero, cfg.lambda);
    }
    out[i] = std::move(s);
  });
  return out;
}

enum class ScoreKind { Calibrated, Raw, Bias, Rela };

template <class S>
std::vector<BagPrediction> predictions(const std::vector<ScoredBag<S>>& scored, ScoreKind kind = ScoreKind::Calibrated) {
  std::vector<BagPrediction> out;
  out.reserve(scored.size());
  for (const auto& s : scored) {
    const ad::Matrix<S>& v = kind == ScoreKind::Calibrated ? s.calibrated : kind == ScoreKind::Raw ? s.y : kind == ScoreKind::Bias ? s.y_bias : s.y_rela;
    if (v.size() == 0) throw std::invalid_argument("requested scores were not computed");
    BagPrediction p{s.bag_id, s.gold, {}};
    for (Eigen::Index j = 0; j < v.cols(); ++j) p.scores.push_back(static_cast<double>(v(0, j)));
    out.push_back(std::move(p));
  }
  return out;
}

template <class S>
EvalReport evaluate(const model::Model<S>& m, const debias::AuxClassifier<S>* aux, const data::Dataset& ds, const DebiasConfig& cfg,
                    int workers = 1) {
  return compute_metrics(predictions(score_dataset(m, aux, ds, cfg, workers)), m.labels());
}

/// JSON lines, one record per ranked (bag, relation) pair.
inline std::string export_jsonl(const std::vector<RankedEntry>& ranked, const data::LabelSpace& labels) {
  std::string out;
  for (const auto& e : ranked) {
    out += nlohmann::json{{"bag_id", e.bag_id}, {"relation", labels.name(e.relation)}, {"score", e.score}}.dump();
    out += "\n";
  }
  return out;
}

}  // namespace xdre::eval

#endif  // XDRE_EVAL_EVALUATE_HPP_
