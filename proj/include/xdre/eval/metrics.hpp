#ifndef XDRE_EVAL_METRICS_HPP_
#define XDRE_EVAL_METRICS_HPP_

// Ranking metrics over (bag, non-NA relation) predictions and argmax-based
// micro-F1. AUC is the step-integrated precision-recall area: the mean, over
// gold positives, of the precision at the rank where each is retrieved
// (unretrieved positives add zero).

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "xdre/data/types.hpp"

namespace xdre::eval {

struct BagPrediction {
  std::string bag_id;
  std::vector<int> gold;
  std::vector<double> scores;  // one per label, NA first
};

struct RankedEntry {
  std::string bag_id;
  int relation = 0;
  double score = 0;

  bool operator==(const RankedEntry&) const = default;
};

/// Every (bag, non-NA relation) pair, by descending score; ties by bag id,
/// then relation index.
inline std::vector<RankedEntry> rank_predictions(const std::vector<BagPrediction>& preds) {
  std::vector<RankedEntry> out;
  for (const auto& p : preds) {
    for (std::size_t r = 1; r < p.scores.size(); ++r) {
      if (std::isnan(p.scores[r])) throw std::invalid_argument("NaN score for bag '" + p.bag_id + "'");
      out.push_back({p.bag_id, static_cast<int>(r), p.scores[r]});
    }
  }
  std::sort(out.begin(), out.end(), [](const RankedEntry& a, const RankedEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return std::tie(a.bag_id, a.relation) < std::tie(b.bag_id, b.relation);
  });
  return out;
}

struct RelationStats {
  std::string name;
  int support = 0;
  int tp = 0;
  int fp = 0;
  int fn = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;

  bool operator==(const RelationStats&) const = default;
};

struct EvalReport {
  std::optional<double> f1;
  std::optional<double> auc;
  std::optional<double> p_at_500;
  std::optional<double> p_at_1000;
  double micro_f1 = 0;
  double micro_precision = 0;
  double micro_recall = 0;
  std::optional<double> threshold;  // score cutoff attaining f1
  double precision_at_threshold = 0;
  double recall_at_threshold = 0;
  std::size_t bags = 0;
  std::size_t gold_positives = 0;
  std::size_t ranked = 0;
  std::vector<RelationStats> per_relation;

  bool operator==(const EvalReport&) const = default;
};

inline double f1_of(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

/// Precision among the first k entries; absent when fewer than k exist.
inline std::optional<double> precision_at(const std::vector<RankedEntry>& ranked, const std::map<std::string, std::set<int>>& gold,
                                          std::size_t k) {
  if (k == 0 || ranked.size() < k) return std::nullopt;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < k; ++i) {
    auto it = gold.find(ranked[i].bag_id);
    if (it != gold.end() && it->second.count(ranked[i].relation)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(k);
}

inline std::map<std::string, std::set<int>> gold_positives(const std::vector<BagPrediction>& preds) {
  std::map<std::string, std::set<int>> gold;
  for (const auto& p : preds) {
    auto& g = gold[p.bag_id];
    for (int l : p.gold) {
      if (l != data::LabelSpace::kNa) g.insert(l);
    }
  }
  return gold;
}

inline EvalReport compute_metrics(const std::vector<RankedEntry>& ranked, const std::vector<BagPrediction>& preds,
                                  const data::LabelSpace& labels) {
  EvalReport rep;
  rep.bags = preds.size();
  rep.ranked = ranked.size();
  const auto gold = gold_positives(preds);
  if (gold.size() != preds.size()) throw std::invalid_argument("compute_metrics: duplicate bag ids");
  for (const auto& [_, g] : gold) rep.gold_positives += g.size();

  if (rep.gold_positives > 0) {
    const auto total = static_cast<double>(rep.gold_positives);
    double area = 0;
    std::size_t hits = 0;
    double best = -1;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      auto it = gold.find(ranked[i].bag_id);
      if (it == gold.end()) throw std::invalid_argument("compute_metrics: ranked bag '" + ranked[i].bag_id + "' has no gold labels");
      if (it->second.count(ranked[i].relation)) {
        ++hits;
        area += static_cast<double>(hits) / static_cast<double>(i + 1);
      }
      const bool group_end = i + 1 == ranked.size() || ranked[i + 1].score != ranked[i].score;
      if (!group_end) continue;
      const double p = static_cast<double>(hits) / static_cast<double>(i + 1);
      const double r = static_cast<double>(hits) / total;
      const double f = f1_of(p, r);
      if (f > best) {
        best = f;
        rep.threshold = ranked[i].score;
        rep.precision_at_threshold = p;
        rep.recall_at_threshold = r;
      }
    }
    rep.auc = area / total;
    rep.f1 = std::max(best, 0.0);
  }
  rep.p_at_500 = precision_at(ranked, gold, 500);
  rep.p_at_1000 = precision_at(ranked, gold, 1000);

  // Argmax decisions; an NA argmax predicts nothing. Ties go to the lower index.
  const int n_labels = labels.size();
  std::vector<RelationStats> stats(static_cast<std::size_t>(std::max(n_labels, 1)));
  int tp = 0, fp = 0, fn = 0;
  for (const auto& p : preds) {
    if (static_cast<int>(p.scores.size()) != n_labels) throw std::invalid_argument("compute_metrics: score vector length differs from label space");
    const auto& g = gold.at(p.bag_id);
    int arg = 0;
    for (int r = 1; r < n_labels; ++r) {
      if (p.scores[static_cast<std::size_t>(r)] > p.scores[static_cast<std::size_t>(arg)]) arg = r;
    }
    for (int l : g) {
      stats[static_cast<std::size_t>(l)].support += 1;
      if (l != arg) {
        ++fn;
        stats[static_cast<std::size_t>(l)].fn += 1;
      }
    }
    if (arg != data::LabelSpace::kNa) {
      if (g.count(arg)) {
        ++tp;
        stats[static_cast<std::size_t>(arg)].tp += 1;
      } else {
        ++fp;
        stats[static_cast<std::size_t>(arg)].fp += 1;
      }
    }
  }
  if (tp + fp + fn == 0) {
    rep.micro_precision = rep.micro_recall = rep.micro_f1 = 1.0;  // nothing to find and nothing claimed
  } else {
    rep.micro_precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    rep.micro_recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    rep.micro_f1 = f1_of(rep.micro_precision, rep.micro_recall);
  }
  for (int r = 1; r < n_labels; ++r) {
    RelationStats s = stats[static_cast<std::size_t>(r)];
    s.name = labels.name(r);
    s.precision = s.tp + s.fp > 0 ? static_cast<double>(s.tp) / (s.tp + s.fp) : 0.0;
    s.recall = s.tp + s.fn > 0 ? static_cast<double>(s.tp) / (s.tp + s.fn) : 0.0;
    s.f1 = f1_of(s.precision, s.recall);
    rep.per_relation.push_back(std::move(s));
  }
  return rep;
}

inline EvalReport compute_metrics(const std::vector<BagPrediction>& preds, const data::LabelSpace& labels) {
  return compute_metrics(rank_predictions(preds), preds, labels);
}

inline nlohmann::json to_json(const EvalReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json per = nlohmann::json::array();
  for (const auto& s : r.per_relation) {
    per.push_back({{"relation", s.name}, {"support", s.support}, {"tp", s.tp}, {"fp", s.fp}, {"fn", s.fn},
                   {"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}});
  }
  return {{"f1", opt(r.f1)},
          {"auc", opt(r.auc)},
          {"p_at_500", opt(r.p_at_500)},
          {"p_at_1000", opt(r.p_at_1000)},
          {"micro_f1", r.micro_f1},
          {"micro_precision", r.micro_precision},
          {"micro_recall", r.micro_recall},
          {"threshold", opt(r.threshold)},
          {"precision_at_threshold", r.precision_at_threshold},
          {"recall_at_threshold", r.recall_at_threshold},
          {"bags", r.bags},
          {"gold_positives", r.gold_positives},
          {"ranked", r.ranked},
          {"per_relation", per}};
}

}  // namespace xdre::eval

#endif  // XDRE_EVAL_METRICS_HPP_
