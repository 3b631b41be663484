#ifndef XDRE_TESTS_HELPERS_HPP_
#define XDRE_TESTS_HELPERS_HPP_

#include <cmath>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "xdre/xdre.hpp"

namespace testutil {

using namespace xdre;

template <class S>
ad::Matrix<S> random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  ad::Matrix<S> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(dist(rng));
  return m;
}

inline std::vector<std::string> split_words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

/// Document from space-separated sentences and (entity, sent, start, end) mentions.
inline data::Document make_doc(const std::vector<std::string>& sentences, std::vector<data::Mention> mentions) {
  data::Document d;
  for (const auto& s : sentences) d.sentences.push_back(split_words(s));
  d.mentions = std::move(mentions);
  return d;
}

/// Two paths, targets h and t; with `bridge` a shared entity x appears in
/// both documents of the first path (5 graph nodes), else 4 nodes.
inline data::DocumentBag two_path_bag(bool bridge, int label = 1) {
  data::DocumentBag b;
  b.id = bridge ? "fd5" : "fd4";
  b.head = "h";
  b.tail = "t";
  b.labels = {label};
  if (bridge) {
    b.paths.push_back({make_doc({"alpha met xeno today ."}, {{"h", 0, 0, 1}, {"x", 0, 2, 3}}),
                       make_doc({"beta saw xeno too ."}, {{"t", 0, 0, 1}, {"x", 0, 2, 3}})});
  } else {
    b.paths.push_back({make_doc({"alpha met someone today ."}, {{"h", 0, 0, 1}}), make_doc({"beta saw it too ."}, {{"t", 0, 0, 1}})});
  }
  b.paths.push_back({make_doc({"alpha went home ."}, {{"h", 0, 0, 1}}), make_doc({"later beta stayed ."}, {{"t", 0, 1, 2}})});
  return b;
}

/// Path 1 of the running example: a radio station and a republic, linked
/// through the shared entity "Russian".
inline data::DocumentBag figure1_bag() {
  data::DocumentBag b;
  b.id = "europa_plus|soviet_union";
  b.head = "Europa Plus";
  b.tail = "Soviet Union";
  b.labels = {1};
  b.paths.push_back({make_doc({"Europa Plus broadcasts in Russian .", "It is a Russian radio station ."},
                              {{"Europa Plus", 0, 0, 2}, {"Russian", 0, 3, 4}, {"Russian radio station", 1, 3, 6}}),
                     make_doc({"The Soviet Union included the Russian Soviet Republic .", "People there spoke Russian ."},
                              {{"Soviet Union", 0, 1, 3}, {"Russian Soviet Republic", 0, 5, 8}, {"Russian", 1, 3, 4}})});
  return b;
}

/// Defaults shrunk for fast tests.
inline util::Config small_config() {
  util::Config c = default_config();
  c.set("encoder.hidden_dim", "8");
  c.set("head.attn_heads", "2");
  c.set("head.ffn_dim", "16");
  c.set("grn.timesteps", "2");
  c.set("data.budget", "128");
  return c;
}

template <class S>
std::shared_ptr<model::Model<S>> build_model(const util::Config& cfg, const data::Dataset& ds, std::uint64_t seed) {
  const auto mc = model_config(cfg);
  auto backend = model::make_backend<S>(mc.encoder, encoder::Vocabulary::from_datasets({&ds}), static_cast<std::size_t>(mc.budget));
  auto m = std::make_shared<model::Model<S>>(mc, ds.label_space, std::move(backend));
  m->init_params(seed);
  return m;
}

inline data::Dataset single_bag_dataset(const data::DocumentBag& bag, int relations = 2) {
  data::Dataset ds;
  ds.label_space = data::LabelSpace::synthetic(relations);
  ds.bags.push_back(bag);
  return ds;
}

/// |a - n| / max(|a|, |n|, floor)
inline double relative_error(long double analytic, long double numeric, long double floor) {
  const long double denom = std::max({std::fabs(analytic), std::fabs(numeric), floor});
  return static_cast<double>(std::fabs(analytic - numeric) / denom);
}

struct FdResult {
  double max_rel = 0;
  std::string worst;
  std::size_t checked = 0;
};

/// Central differences of `loss` against every entry of every tensor in
/// `params`, compared with `analytic` (name -> gradient; missing = zero).
template <class S>
FdResult finite_difference(ad::ParamSet<S>& params, const std::map<std::string, ad::Matrix<S>>& analytic,
                           const std::function<S()>& loss, double step, long double floor) {
  FdResult r;
  for (auto& [name, m] : params.store()) {
    auto it = analytic.find(name);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const S saved = m.data()[i];
      m.data()[i] = saved + static_cast<S>(step);
      const S up = loss();
      m.data()[i] = saved - static_cast<S>(step);
      const S down = loss();
      m.data()[i] = saved;
      const long double numeric = (static_cast<long double>(up) - static_cast<long double>(down)) / (2.0L * step);
      const long double a = it == analytic.end() ? 0.0L : static_cast<long double>(it->second.data()[i]);
      const double e = relative_error(a, numeric, floor);
      ++r.checked;
      if (e > r.max_rel) {
        r.max_rel = e;
        std::ostringstream os;
        os << name << "[" << i << "] analytic " << static_cast<double>(a) << " numeric " << static_cast<double>(numeric);
        r.worst = os.str();
      }
    }
  }
  return r;
}

template <class S>
std::map<std::string, ad::Matrix<S>> collect_grads(ad::Tape<S>& tape) {
  std::map<std::string, ad::Matrix<S>> out;
  for (const auto& [name, g] : tape.parameter_grads()) out.emplace(name, *g);
  return out;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("xdre_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testutil

#endif  // XDRE_TESTS_HELPERS_HPP_
