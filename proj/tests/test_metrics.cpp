#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "xdre/xdre.hpp"

namespace {

using namespace xdre;
using eval::BagPrediction;

struct Sample {
  std::vector<BagPrediction> preds;
  std::vector<oracle::BfPrediction> bf;
  data::LabelSpace labels;
};

/// Scores come from a small grid when `ties` so equal scores are frequent.
Sample random_sample(std::mt19937_64& rng, int bags, int relations, bool ties) {
  Sample s;
  s.labels = data::LabelSpace::synthetic(relations);
  std::uniform_real_distribution<double> u(0, 1);
  for (int b = 0; b < bags; ++b) {
    BagPrediction p;
    p.bag_id = "b" + std::to_string(rng() % 100000) + "_" + std::to_string(b);
    const int kind = static_cast<int>(rng() % 3);
    if (kind == 0) {
      p.gold = {0};
    } else {
      for (int r = 1; r <= relations; ++r)
        if (rng() % static_cast<unsigned>(relations) == 0) p.gold.push_back(r);
      if (p.gold.empty()) p.gold = {1 + static_cast<int>(rng() % static_cast<unsigned>(relations))};
    }
    for (int r = 0; r <= relations; ++r) p.scores.push_back(ties ? std::round(u(rng) * 8) / 8 : u(rng));
    oracle::BfPrediction o{p.bag_id, {}, p.scores};
    for (int g : p.gold)
      if (g != 0) o.gold.insert(g);
    s.preds.push_back(p);
    s.bf.push_back(std::move(o));
  }
  return s;
}

void expect_close(const std::optional<double>& got, bool has, long double want, const char* what) {
  ASSERT_EQ(got.has_value(), has) << what;
  if (has) EXPECT_NEAR(*got, static_cast<double>(want), 1e-12) << what;
}

TEST(Metrics, MatchesOracleOn500Lists) {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 500; ++i) {
    // Every 50th list is long enough for P@500 and P@1000.
    const int bags = i % 50 == 0 ? 260 + static_cast<int>(rng() % 120) : 1 + static_cast<int>(rng() % 40);
    const int relations = 1 + static_cast<int>(rng() % 4);
    const auto s = random_sample(rng, bags, relations, i % 2 == 0);
    const auto rep = eval::compute_metrics(s.preds, s.labels);
    const auto bf = oracle::brute_force_metrics(s.bf);
    SCOPED_TRACE("list " + std::to_string(i));
    expect_close(rep.auc, bf.has_auc, bf.auc, "auc");
    expect_close(rep.f1, bf.has_auc, bf.f1, "f1");
    expect_close(rep.p_at_500, bf.has_p500, bf.p500, "p@500");
    expect_close(rep.p_at_1000, bf.has_p1000, bf.p1000, "p@1000");
    EXPECT_NEAR(rep.micro_f1, static_cast<double>(bf.micro_f1), 1e-12);
  }
}

TEST(Metrics, AlternatingRankingAuc) {
  std::vector<BagPrediction> preds;
  const double scores[] = {0.9, 0.8, 0.7, 0.6};
  for (int i = 0; i < 4; ++i) preds.push_back({"b" + std::to_string(i), {i % 2 == 0 ? 1 : 0}, {0.0, scores[i]}});
  const auto rep = eval::compute_metrics(preds, data::LabelSpace::synthetic(1));
  ASSERT_TRUE(rep.auc);
  EXPECT_NEAR(*rep.auc, 5.0 / 6.0, 1e-12);
  EXPECT_NEAR(*rep.auc, 0.8333, 1e-4);
  EXPECT_FALSE(rep.p_at_500);
}

TEST(Metrics, RankingBreaksTiesByBagThenRelation) {
  std::vector<BagPrediction> preds = {{"b", {0}, {0.0, 0.5, 0.5}}, {"a", {0}, {0.0, 0.5, 0.9}}};
  const auto ranked = eval::rank_predictions(preds);
  ASSERT_EQ(ranked.size(), 4u);
  EXPECT_EQ(ranked[0], (eval::RankedEntry{"a", 2, 0.9}));
  EXPECT_EQ(ranked[1], (eval::RankedEntry{"a", 1, 0.5}));
  EXPECT_EQ(ranked[2], (eval::RankedEntry{"b", 1, 0.5}));
  EXPECT_EQ(ranked[3], (eval::RankedEntry{"b", 2, 0.5}));
}

TEST(Metrics, TiedScoresShareOneThreshold) {
  // One positive among two tied entries: the cutoff cannot split them.
  std::vector<BagPrediction> preds = {{"a", {0}, {0.0, 0.5}}, {"b", {1}, {0.0, 0.5}}};
  const auto rep = eval::compute_metrics(preds, data::LabelSpace::synthetic(1));
  EXPECT_NEAR(*rep.f1, 2 * 0.5 * 1.0 / 1.5, 1e-12);
  EXPECT_NEAR(*rep.threshold, 0.5, 0);
}

TEST(Metrics, AllNaGoldHasNoRankingMetrics) {
  std::vector<BagPrediction> preds = {{"a", {0}, {0.9, 0.1}}, {"b", {0}, {0.8, 0.3}}};
  const auto rep = eval::compute_metrics(preds, data::LabelSpace::synthetic(1));
  EXPECT_FALSE(rep.auc);
  EXPECT_FALSE(rep.f1);
  EXPECT_EQ(rep.micro_f1, 1.0);
  preds[0].scores = {0.1, 0.9};
  EXPECT_EQ(eval::compute_metrics(preds, data::LabelSpace::synthetic(1)).micro_f1, 0.0);
}

TEST(Metrics, ArgmaxTiesGoToLowerIndex) {
  std::vector<BagPrediction> preds = {{"a", {1}, {0.5, 0.5}}};
  const auto rep = eval::compute_metrics(preds, data::LabelSpace::synthetic(1));
  EXPECT_EQ(rep.micro_f1, 0.0);
  EXPECT_EQ(rep.per_relation.at(0).fn, 1);
}

TEST(Metrics, RejectsMalformedInput) {
  const auto labels = data::LabelSpace::synthetic(1);
  EXPECT_THROW(eval::compute_metrics({{"a", {1}, {0.0, std::nan("")}}}, labels), std::invalid_argument);
  EXPECT_THROW(eval::compute_metrics({{"a", {1}, {0.0, 0.1}}, {"a", {1}, {0.0, 0.2}}}, labels), std::invalid_argument);
  EXPECT_THROW(eval::compute_metrics({{"a", {1}, {0.0, 0.1, 0.3}}}, labels), std::invalid_argument);
}

TEST(Metrics, JsonUsesNullForAbsentValues) {
  const auto rep = eval::compute_metrics({{"a", {1}, {0.0, 0.7}}}, data::LabelSpace::synthetic(1));
  const auto j = eval::to_json(rep);
  EXPECT_TRUE(j["p_at_500"].is_null());
  EXPECT_DOUBLE_EQ(j["auc"].get<double>(), 1.0);
  EXPECT_EQ(j["per_relation"][0]["relation"], "rel_1");
}

}  // namespace
