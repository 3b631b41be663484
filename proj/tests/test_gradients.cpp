#include <gtest/gtest.h>

#include <functional>
#include <random>

#include "helpers.hpp"

namespace {

using namespace xdre;
using testutil::random_matrix;
using LD = long double;

using OpFn = std::function<ad::Var<LD>(ad::Tape<LD>&, const ad::ParamSet<LD>&)>;

/// Gradient of sum(W .* op(inputs)) against central differences.
testutil::FdResult check_op(ad::ParamSet<LD> params, const OpFn& op, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ad::Matrix<LD> weights;
  {
    ad::Tape<LD> probe(false);
    const auto out = op(probe, params).value();
    weights = random_matrix<LD>(out.rows(), out.cols(), rng);
  }
  ad::Tape<LD> tape;
  auto loss = ad::weighted_sum(op(tape, params), weights);
  tape.backward(loss);
  const auto grads = testutil::collect_grads(tape);
  auto f = [&]() {
    ad::Tape<LD> t(false);
    return ad::weighted_sum(op(t, params), weights).value()(0, 0);
  };
  return testutil::finite_difference<LD>(params, grads, f, 1e-4, 1e-6L);
}

ad::ParamSet<LD> inputs(std::initializer_list<std::pair<const char*, std::pair<int, int>>> shapes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ad::ParamSet<LD> p;
  for (const auto& [name, s] : shapes) p.emplace(name, random_matrix<LD>(s.first, s.second, rng));
  return p;
}

constexpr double kOpTol = 1e-6;

TEST(Gradients, ElementwiseOps) {
  auto p = inputs({{"a", {3, 4}}, {"b", {3, 4}}, {"r", {1, 4}}}, 1);
  EXPECT_LT(check_op(p, [](auto& t, const auto& ps) { return ad::add(ps.var(t, "a"), ps.var(t, "b")); }, 2).max_rel, kOpTol);
  EXPECT_LT(check_op(p, [](auto& t, const auto& ps) { return ad::sub(ps.var(t, "a"), ps.var(t, "b")); }, 3).max_rel, kOpTol);
  EXPECT_LT(check_op(p, [](auto& t, const auto& ps) { return ad::mul(ps.var(t, "a"), ps.var(t, "b")); }, 4).max_rel, kOpTol);
  EXPECT_LT(check_op(p, [](auto& t, const auto& ps) { return ad::scale(ps.var(t, "a"), LD(-1.7)); }, 5).max_rel, kOpTol);
  EXPECT_LT(check_op(p, [](auto& t, const auto& ps) { return ad::one_minus(ps.var(t, "a")); }, 6).max_rel, kOpTol);
  EXPECT_LT(check_op(p, [](auto& t, const auto& ps) { return ad::add_row(ps.var(t, "a"), ps.var(t, "r")); }, 7).max_rel, kOpTol);
  EXPECT_LT(check_op(p, [](auto& t, const auto& ps) { return ad::sigmoid(ps.var(t, "a")); }, 8).max_rel, kOpTol);
  EXPECT_LT(check_op(p, [](auto& t, const auto& ps) { return ad::tanh(ps.var(t, "a")); }, 9).max_rel, kOpTol);
  EXPECT_LT(check_op(p, [](auto& t, const auto& ps) { return ad::relu(ps.var(t, "a")); }, 10).max_rel, kOpTol);
  EXPECT_LT(check_op(p, [](auto& t, const auto& ps) { return ad::gelu(ps.var(t, "a")); }, 11).max_rel, kOpTol);
}

TEST(Gradients, MatrixOps) {
  auto p = inputs({{"x", {3, 4}}, {"w", {5, 4}}, {"b", {1, 5}}, {"y", {4, 2}}, {"z", {2, 4}}}, 12);
  EXPECT_LT(check_op(p, [](auto& t, const auto& ps) { return ad::matmul(ps.var(t, "x"), ps.var(t, "y")); }, 13).max_rel, kOpTol);
  EXPECT_LT(check_op(p, [](auto& t, const auto& ps) { return ad::matmul_nt(ps.var(t, "x"), ps.var(t, "z")); }, 14).max_rel, kOpTol);
  EXPECT_LT(check_op(p, [](auto& t, const auto& ps) {
              auto b = ps.var(t, "b");
              return ad::linear(ps.var(t, "x"), ps.var(t, "w"), &b);
            }, 15).max_rel,
            kOpTol);
}

TEST(Gradients, RowReductionsAndShapes) {
  auto p = inputs({{"a", {4, 3}}, {"b", {2, 3}}, {"g", {1, 3}}, {"be", {1, 3}}, {"u", {3, 3}}}, 16);
  EXPECT_LT(check_op(p, [](auto& t, const auto& ps) { return ad::softmax_rows(ps.var(t, "a")); }, 17).max_rel, kOpTol);
  EXPECT_LT(check_op(p, [](auto& t, const auto& ps) { return ad::max_rows(ps.var(t, "a")); }, 18).max_rel, kOpTol);
  EXPECT_LT(check_op(p, [](auto& t, const auto& ps) { return ad::max_rows(ps.var(t, "a"), 1, 3); }, 19).max_rel, kOpTol);
  EXPECT_LT(check_op(p, [](auto& t, const auto& ps) { return ad::logsumexp_rows(ps.var(t, "a")); }, 20).max_rel, kOpTol);
  EXPECT_LT(check_op(p, [](auto& t, const auto& ps) {
              return ad::layer_norm_rows(ps.var(t, "a"), ps.var(t, "g"), ps.var(t, "be"), LD(1e-5));
            }, 21).max_rel,
            kOpTol);
  EXPECT_LT(check_op(p, [](auto& t, const auto& ps) { return ad::gather_rows(ps.var(t, "a"), {3, 0, 3, 1}); }, 22).max_rel, kOpTol);
  EXPECT_LT(check_op(p, [](auto& t, const auto& ps) { return ad::slice_rows(ps.var(t, "a"), 1, 2); }, 23).max_rel, kOpTol);
  EXPECT_LT(check_op(p, [](auto& t, const auto& ps) { return ad::slice_cols(ps.var(t, "a"), 1, 2); }, 24).max_rel, kOpTol);
  EXPECT_LT(check_op(p, [](auto& t, const auto& ps) { return ad::concat_rows(std::vector<ad::Var<LD>>{ps.var(t, "a"), ps.var(t, "b")}); }, 25).max_rel, kOpTol);
  EXPECT_LT(check_op(p, [](auto& t, const auto& ps) { return ad::concat_cols(std::vector<ad::Var<LD>>{ps.var(t, "a"), ps.var(t, "a")}); }, 26).max_rel, kOpTol);
  EXPECT_LT(check_op(p, [](auto& t, const auto& ps) {
              return ad::tanh_recurrence(ps.var(t, "a"), ps.var(t, "u"), {{0, 3}, {3, 4}}, false);
            }, 27).max_rel,
            kOpTol);
  EXPECT_LT(check_op(p, [](auto& t, const auto& ps) {
              return ad::tanh_recurrence(ps.var(t, "a"), ps.var(t, "u"), {{0, 4}}, true);
            }, 28).max_rel,
            kOpTol);
}

TEST(Gradients, AttentionAndLoss) {
  auto p = inputs({{"x", {5, 4}}, {"qw", {4, 4}}, {"qb", {1, 4}}, {"kw", {4, 4}}, {"kb", {1, 4}}, {"vw", {4, 4}}, {"vb", {1, 4}},
                   {"ow", {4, 4}}, {"ob", {1, 4}}},
                  29);
  auto attn = [](std::vector<Eigen::Index>* queries) {
    return [queries](ad::Tape<LD>& t, const ad::ParamSet<LD>& ps) {
      ad::AttentionWeightsVars<LD> w{ps.var(t, "qw"), ps.var(t, "qb"), ps.var(t, "kw"), ps.var(t, "kb"),
                                     ps.var(t, "vw"), ps.var(t, "vb"), ps.var(t, "ow"), ps.var(t, "ob")};
      return ad::multi_head_self_attention<LD>(ps.var(t, "x"), w, 2, nullptr, nullptr, queries);
    };
  };
  EXPECT_LT(check_op(p, attn(nullptr), 30).max_rel, kOpTol);
  std::vector<Eigen::Index> q{4, 1};
  EXPECT_LT(check_op(p, attn(&q), 31).max_rel, kOpTol);

  auto s = inputs({{"p", {1, 4}}}, 32);
  s.at("p") = s.at("p").cwiseAbs();
  EXPECT_LT(check_op(s, [](auto& t, const auto& ps) { return ad::normalized_nll(ps.var(t, "p"), {1, 3}, LD(1e-12)); }, 33).max_rel, kOpTol);
}

TEST(Gradients, SharedParameterAccumulates) {
  ad::ParamSet<LD> p;
  p.emplace("w", ad::Matrix<LD>::Constant(1, 1, 3));
  ad::Tape<LD> tape;
  auto a = p.var(tape, "w");
  auto b = p.var(tape, "w");
  EXPECT_EQ(a.id(), b.id());
  auto y = ad::mul(a, b);  // w^2
  tape.backward(y);
  EXPECT_EQ(static_cast<double>(a.grad()(0, 0)), 6.0);
}

TEST(Gradients, FrozenPrefixGetsNoGradient) {
  ad::ParamSet<LD> p;
  p.emplace("aux.w", ad::Matrix<LD>::Constant(1, 1, 2));
  p.emplace("enc.w", ad::Matrix<LD>::Constant(1, 1, 5));
  ad::Tape<LD> tape;
  tape.freeze("enc.");
  auto y = ad::mul(p.var(tape, "aux.w"), p.var(tape, "enc.w"));
  tape.backward(y);
  const auto grads = testutil::collect_grads(tape);
  ASSERT_EQ(grads.size(), 1u);
  EXPECT_EQ(static_cast<double>(grads.at("aux.w")(0, 0)), 5.0);
}

// Per-module GRN check in long double on a 5-node graph.
TEST(Gradients, GrnModuleHighPrecision) {
  std::mt19937_64 rng(40);
  ad::ParamSet<LD> p;
  grn::GrnConfig cfg;
  cfg.timesteps = 3;
  grn::init_params(p, 4, cfg, rng);
  for (const char* b : {"grn.b_r", "grn.b_z", "grn.b_u"}) p.at(b) = random_matrix<LD>(1, 4, rng, 0.3);
  p.emplace("init", random_matrix<LD>(5, 4, rng));
  ad::Matrix<LD> adj = ad::Matrix<LD>::Zero(5, 5);
  for (auto [a, b] : std::vector<std::pair<int, int>>{{0, 4}, {1, 4}, {2, 3}, {3, 4}, {0, 2}}) adj(a, b) = adj(b, a) = 1;
  const ad::Matrix<LD> w = random_matrix<LD>(5, 4, rng);
  ad::Tape<LD> tape;
  auto loss = ad::weighted_sum(grn::encode(adj, p.var(tape, "init"), p, cfg), w);
  tape.backward(loss);
  const auto grads = testutil::collect_grads(tape);
  auto f = [&]() {
    ad::Tape<LD> t(false);
    return ad::weighted_sum(grn::encode(adj, p.var(t, "init"), p, cfg), w).value()(0, 0);
  };
  const auto r = testutil::finite_difference<LD>(p, grads, f, 1e-4, 1e-6L);
  EXPECT_LT(r.max_rel, 1e-4) << r.worst;
  EXPECT_GT(r.checked, 100u);
}

template <class S>
testutil::FdResult end_to_end(bool bridge, const util::Config& cfg, std::uint64_t seed, int* node_count = nullptr) {
  auto ds = testutil::single_bag_dataset(testutil::two_path_bag(bridge));
  const auto budget = static_cast<std::size_t>(cfg.get_int("data.budget"));
  ds.bags[0] = model::prepare_bag(ds.bags[0], budget);
  auto m = testutil::build_model<S>(cfg, ds, seed);
  const auto& bag = ds.bags[0];
  ad::Tape<S> tape;
  const auto f = m->forward(tape, bag);
  if (node_count) *node_count = f.graph.size();
  auto loss = m->loss(f, bag);
  tape.backward(loss);
  const auto grads = testutil::collect_grads(tape);
  auto fn = [&]() {
    ad::Tape<S> t(false);
    return m->loss(m->forward(t, bag), bag).value()(0, 0);
  };
  return testutil::finite_difference<S>(m->params(), grads, fn, 1e-4, 1e-6L);
}

TEST(Gradients, EndToEndFiveNodeHighPrecision) {
  int nodes = 0;
  const auto r = end_to_end<LD>(true, testutil::small_config(), 7, &nodes);
  EXPECT_EQ(nodes, 5);
  EXPECT_LT(r.max_rel, 1e-4) << r.worst;
}

TEST(Gradients, EndToEndFiveNodeDouble) {
  int nodes = 0;
  const auto r = end_to_end<double>(true, testutil::small_config(), 7, &nodes);
  EXPECT_EQ(nodes, 5);
  EXPECT_LT(r.max_rel, 1e-3) << r.worst;
}

TEST(Gradients, EndToEndFourNodeDouble) {
  int nodes = 0;
  // Seed 7 puts a ReLU/max switch within the 1e-4 step of this bag.
  const auto r = end_to_end<double>(false, testutil::small_config(), 1, &nodes);
  EXPECT_EQ(nodes, 4);
  EXPECT_LT(r.max_rel, 1e-3) << r.worst;
}

TEST(Gradients, EndToEndBestPathPoolingWithoutGrn) {
  auto cfg = testutil::small_config();
  cfg.set("grn.timesteps", "0");
  cfg.set("head.pool", "best_path");
  cfg.set("grn.use_bias", "false");
  const auto r = end_to_end<LD>(true, cfg, 9);
  EXPECT_LT(r.max_rel, 1e-4) << r.worst;
}

}  // namespace
