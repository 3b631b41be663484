#include <gtest/gtest.h>

#include <random>

#include "helpers.hpp"
#include "oracles.hpp"

namespace {

using namespace xdre;
using testutil::random_matrix;
using M = ad::Matrix<double>;

constexpr int kTrials = 120;
constexpr double kTol = 1e-8;

oracle::Gru oracle_gru(const ad::ParamSet<double>& p, bool bias) {
  oracle::Gru g{oracle::from_eigen(p.at("grn.W_r")), oracle::from_eigen(p.at("grn.U_r")), oracle::from_eigen(p.at("grn.W_z")),
                oracle::from_eigen(p.at("grn.U_z")), oracle::from_eigen(p.at("grn.W_u")), oracle::from_eigen(p.at("grn.U_u")),
                {}, {}, {}};
  if (bias) {
    g.b_r = oracle::row_of(p.at("grn.b_r"));
    g.b_z = oracle::row_of(p.at("grn.b_z"));
    g.b_u = oracle::row_of(p.at("grn.b_u"));
  }
  return g;
}

ad::ParamSet<double> random_grn(int d, bool bias, std::mt19937_64& rng) {
  ad::ParamSet<double> p;
  grn::GrnConfig cfg;
  cfg.use_bias = bias;
  grn::init_params(p, d, cfg, rng);
  // Non-zero biases so they are exercised.
  for (auto& [_, m] : p.store()) m = random_matrix<double>(m.rows(), m.cols(), rng, 0.8);
  return p;
}

TEST(Equations, GruStepMatchesScalarLoops) {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < kTrials; ++trial) {
    const int d = 1 + static_cast<int>(rng() % 10);
    const int n = 1 + static_cast<int>(rng() % 6);
    const bool bias = trial % 3 != 0;
    auto p = random_grn(d, bias, rng);
    grn::GrnConfig cfg;
    cfg.use_bias = bias;
    const M c = random_matrix<double>(n, d, rng, 2.0);
    const M e = random_matrix<double>(n, d, rng, 1.5);
    ad::Tape<double> tape(false);
    const M got = grn::gru_step(tape.constant(c), tape.constant(e), grn::bind_weights(tape, p, cfg, 0)).value();
    const auto g = oracle_gru(p, bias);
    for (int i = 0; i < n; ++i) {
      const auto want = oracle::gru_step(oracle::row_of(c, i), oracle::row_of(e, i), g);
      ASSERT_LT(oracle::max_abs_diff(oracle::row_of(got, i), want), kTol) << "trial " << trial;
    }
  }
}

TEST(Equations, NeighborContextMatchesEdgeListSum) {
  std::mt19937_64 rng(102);
  for (int trial = 0; trial < kTrials; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 9);
    const int d = 1 + static_cast<int>(rng() % 7);
    std::vector<std::pair<int, int>> edges;
    M adj = M::Zero(n, n);
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) {
        if (rng() % 2) {
          edges.emplace_back(a, b);
          adj(a, b) = adj(b, a) = 1;
        }
      }
    }
    const M states = random_matrix<double>(n, d, rng, 3.0);
    ad::Tape<double> tape(false);
    const M got = grn::neighbor_context(adj, tape.constant(states)).value();
    const auto want = oracle::neighbor_context(n, edges, oracle::from_eigen(states));
    for (int i = 0; i < n; ++i) ASSERT_LT(oracle::max_abs_diff(oracle::row_of(got, i), want[static_cast<std::size_t>(i)]), kTol);
  }
}

TEST(Equations, GrnEncodeMatchesIteratedOracle) {
  std::mt19937_64 rng(103);
  for (int trial = 0; trial < kTrials; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 6);
    const int d = 1 + static_cast<int>(rng() % 6);
    const int steps = 1 + static_cast<int>(rng() % 4);
    auto p = random_grn(d, true, rng);
    std::vector<std::pair<int, int>> edges;
    M adj = M::Zero(n, n);
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) {
        if (rng() % 3 == 0) {
          edges.emplace_back(a, b);
          adj(a, b) = adj(b, a) = 1;
        }
      }
    }
    const M init = random_matrix<double>(n, d, rng);
    grn::GrnConfig cfg;
    cfg.timesteps = steps;
    ad::Tape<double> tape(false);
    const M got = grn::encode(adj, tape.constant(init), p, cfg).value();
    const auto want = oracle::grn_encode(n, edges, oracle::from_eigen(init), oracle_gru(p, true), steps);
    for (int i = 0; i < n; ++i) ASSERT_LT(oracle::max_abs_diff(oracle::row_of(got, i), want[static_cast<std::size_t>(i)]), kTol);
  }
}

TEST(Equations, PairReprMatchesScalarLoops) {
  std::mt19937_64 rng(104);
  for (int trial = 0; trial < kTrials; ++trial) {
    const int d = 1 + static_cast<int>(rng() % 12);
    ad::ParamSet<double> p;
    head::init_params(p, d, 3, head::HeadConfig{0, 1, 0, 0, head::PoolMode::ComponentwiseMax, 4096}, rng);
    for (const char* b : {"head.pair.b_uv", "head.pair.b"}) p.at(b) = random_matrix<double>(1, d, rng, 0.5);
    const M ei = random_matrix<double>(1, d, rng, 2.0);
    const M ej = random_matrix<double>(1, d, rng, 2.0);
    ad::Tape<double> tape(false);
    const M got = head::pair_repr(tape.constant(ei), tape.constant(ej), p).value();
    const auto want = oracle::pair_repr(oracle::row_of(ei), oracle::row_of(ej), oracle::from_eigen(p.at("head.pair.W_u")),
                                        oracle::from_eigen(p.at("head.pair.W_v")), oracle::row_of(p.at("head.pair.b_uv")),
                                        oracle::from_eigen(p.at("head.pair.W")), oracle::row_of(p.at("head.pair.b")));
    ASSERT_LT(oracle::max_abs_diff(oracle::row_of(got), want), kTol);

    // The batched relation matrix holds the same vector at row i*n+j.
    const int n = 1 + static_cast<int>(rng() % 4);
    const M states = random_matrix<double>(n, d, rng, 2.0);
    ad::Tape<double> t2(false);
    const M all = head::relation_matrix(t2.constant(states), p).value();
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const auto w = oracle::pair_repr(oracle::row_of(states, i), oracle::row_of(states, j), oracle::from_eigen(p.at("head.pair.W_u")),
                                         oracle::from_eigen(p.at("head.pair.W_v")), oracle::row_of(p.at("head.pair.b_uv")),
                                         oracle::from_eigen(p.at("head.pair.W")), oracle::row_of(p.at("head.pair.b")));
        ASSERT_LT(oracle::max_abs_diff(oracle::row_of(all, i * n + j), w), kTol);
      }
    }
  }
}

TEST(Equations, ClassifyPathMatchesScalarLoops) {
  std::mt19937_64 rng(105);
  for (int trial = 0; trial < kTrials; ++trial) {
    const int d = 1 + static_cast<int>(rng() % 10);
    const int labels = 2 + static_cast<int>(rng() % 5);
    const int hidden = 1 + static_cast<int>(rng() % 8);
    ad::ParamSet<double> p;
    head::init_params(p, d, labels, head::HeadConfig{0, 1, 0, hidden, head::PoolMode::ComponentwiseMax, 4096}, rng);
    p.at("head.mlp.hidden.bias") = random_matrix<double>(1, hidden, rng, 0.5);
    p.at("head.mlp.out.bias") = random_matrix<double>(1, labels, rng, 0.5);
    const int paths = 1 + static_cast<int>(rng() % 4);
    const M r = random_matrix<double>(paths, d, rng, 3.0);
    ad::Tape<double> tape(false);
    const M got = head::classify_path(tape.constant(r), p).value();
    for (int k = 0; k < paths; ++k) {
      const auto want = oracle::classify_path(oracle::row_of(r, k), oracle::from_eigen(p.at("head.mlp.hidden.weight")),
                                              oracle::row_of(p.at("head.mlp.hidden.bias")), oracle::from_eigen(p.at("head.mlp.out.weight")),
                                              oracle::row_of(p.at("head.mlp.out.bias")));
      ASSERT_LT(oracle::max_abs_diff(oracle::row_of(got, k), want), kTol);
    }
  }
}

TEST(Equations, BagPoolIsComponentwiseMax) {
  std::mt19937_64 rng(106);
  for (int trial = 0; trial < kTrials; ++trial) {
    const int paths = 1 + static_cast<int>(rng() % 6);
    const int labels = 2 + static_cast<int>(rng() % 6);
    M s = random_matrix<double>(paths, labels, rng).cwiseAbs();
    const M got = head::bag_pool(s);
    ASSERT_LT(oracle::max_abs_diff(oracle::row_of(got), oracle::bag_pool(oracle::from_eigen(s))), kTol);
  }
}

TEST(Equations, CalibrateIsLinearAdjustment) {
  std::mt19937_64 rng(107);
  std::uniform_real_distribution<double> lam(0.0, 2.0);
  for (int trial = 0; trial < kTrials; ++trial) {
    const int labels = 2 + static_cast<int>(rng() % 6);
    const M y = random_matrix<double>(1, labels, rng).cwiseAbs();
    const M r = random_matrix<double>(1, labels, rng).cwiseAbs();
    const M b = random_matrix<double>(1, labels, rng).cwiseAbs();
    const double l = lam(rng);
    const M got = debias::calibrate(y, r, b, l);
    const auto want = oracle::calibrate(oracle::row_of(y), oracle::row_of(r), oracle::row_of(b), l);
    ASSERT_LT(oracle::max_abs_diff(oracle::row_of(got), want), kTol);
  }
}

TEST(Equations, CalibrateWorkedExample) {
  M y(1, 2), r(1, 2), b(1, 2);
  y << 0.6, 0.4;
  r << 0.0, 1.0;
  b << 0.8, 0.2;
  const M got = debias::calibrate(y, r, b, 0.1);
  EXPECT_NEAR(got(0, 0), 0.52, 1e-12);
  EXPECT_NEAR(got(0, 1), 0.48, 1e-12);
  EXPECT_THROW(debias::calibrate(y, M(M::Zero(1, 3)), b, 0.1), std::invalid_argument);
}

TEST(Equations, TransformerLayerMatchesScalarLoops) {
  std::mt19937_64 rng(108);
  for (int trial = 0; trial < 30; ++trial) {
    const int heads = 1 + static_cast<int>(rng() % 3);
    const int d = heads * (1 + static_cast<int>(rng() % 3));
    const int n = 1 + static_cast<int>(rng() % 3);
    const int cells = n * n;
    head::HeadConfig cfg{1, heads, 2 * d, 0, head::PoolMode::ComponentwiseMax, 4096};
    ad::ParamSet<double> p;
    head::init_params(p, d, 2, cfg, rng);
    for (auto& [_, m] : p.store()) m = random_matrix<double>(m.rows(), m.cols(), rng, 0.7);
    const M x = random_matrix<double>(cells, d, rng);
    std::vector<Eigen::Index> roles;
    for (int c = 0; c < cells; ++c) roles.push_back(static_cast<Eigen::Index>(rng() % head::kRolePairCount));

    head::AttentionTrace<double> trace;
    trace.node_count = n;
    ad::Tape<double> tape(false);
    const M got = head::cross_path_attend(tape.constant(x), roles, p, cfg, &trace).value();

    const std::string q = "head.attn.l0.";
    oracle::AttentionLayer L{oracle::from_eigen(p.at(q + "q.weight")), oracle::from_eigen(p.at(q + "k.weight")),
                             oracle::from_eigen(p.at(q + "v.weight")), oracle::from_eigen(p.at(q + "o.weight")),
                             oracle::row_of(p.at(q + "q.bias")),       oracle::row_of(p.at(q + "k.bias")),
                             oracle::row_of(p.at(q + "v.bias")),       oracle::row_of(p.at(q + "o.bias")),
                             oracle::row_of(p.at(q + "ln1.gamma")),    oracle::row_of(p.at(q + "ln1.beta")),
                             oracle::row_of(p.at(q + "ln2.gamma")),    oracle::row_of(p.at(q + "ln2.beta")),
                             oracle::from_eigen(p.at(q + "ffn.in.weight")), oracle::from_eigen(p.at(q + "ffn.out.weight")),
                             oracle::row_of(p.at(q + "ffn.in.bias")),  oracle::row_of(p.at(q + "ffn.out.bias"))};
    oracle::Mat in = oracle::from_eigen(x);
    const auto emb = oracle::from_eigen(p.at("head.role_embedding"));
    for (int c = 0; c < cells; ++c)
      for (int t = 0; t < d; ++t) in[static_cast<std::size_t>(c)][static_cast<std::size_t>(t)] += emb[static_cast<std::size_t>(roles[static_cast<std::size_t>(c)])][static_cast<std::size_t>(t)];
    std::vector<oracle::Mat> probs;
    const auto want = oracle::transformer_layer(in, L, heads, &probs);
    for (int c = 0; c < cells; ++c) ASSERT_LT(oracle::max_abs_diff(oracle::row_of(got, c), want[static_cast<std::size_t>(c)]), kTol);
    ASSERT_EQ(trace.weights.size(), 1u);
    ASSERT_EQ(trace.weights[0].size(), static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h)
      for (int c = 0; c < cells; ++c)
        ASSERT_LT(oracle::max_abs_diff(oracle::row_of(trace.weights[0][static_cast<std::size_t>(h)], c), probs[static_cast<std::size_t>(h)][static_cast<std::size_t>(c)]),
                  kTol);

    // Restricting the last layer to a subset of query rows is exact.
    std::vector<Eigen::Index> subset;
    for (int c = cells - 1; c >= 0; c -= 2) subset.push_back(c);
    ad::Tape<double> t2(false);
    const M part = head::cross_path_attend<double>(t2.constant(x), roles, p, cfg, nullptr, &subset).value();
    ASSERT_EQ(part.rows(), static_cast<Eigen::Index>(subset.size()));
    for (std::size_t i = 0; i < subset.size(); ++i)
      ASSERT_LT((part.row(static_cast<Eigen::Index>(i)) - got.row(subset[i])).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Equations, RestrictedTwoLayerAttentionEqualsFull) {
  std::mt19937_64 rng(109);
  head::HeadConfig cfg{2, 2, 8, 0, head::PoolMode::ComponentwiseMax, 4096};
  ad::ParamSet<double> p;
  head::init_params(p, 4, 3, cfg, rng);
  const int cells = 9;
  const M x = random_matrix<double>(cells, 4, rng);
  std::vector<Eigen::Index> roles(cells, 3);
  ad::Tape<double> t1(false);
  const M full = head::cross_path_attend(t1.constant(x), roles, p, cfg).value();
  const std::vector<Eigen::Index> wanted{5, 1};
  ad::Tape<double> t2(false);
  const M part = head::cross_path_attend<double>(t2.constant(x), roles, p, cfg, nullptr, &wanted).value();
  EXPECT_LT((part.row(0) - full.row(5)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((part.row(1) - full.row(1)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Equations, AttentionBudgetIsEnforced) {
  std::mt19937_64 rng(110);
  head::HeadConfig cfg{1, 1, 4, 0, head::PoolMode::ComponentwiseMax, 8};
  ad::ParamSet<double> p;
  head::init_params(p, 2, 2, cfg, rng);
  ad::Tape<double> tape(false);
  EXPECT_THROW(head::cross_path_attend(tape.constant(M::Zero(9, 2)), std::vector<Eigen::Index>(9, 0), p, cfg), head::AttentionBudgetError);
}

}  // namespace
