#ifndef XDRE_TRAIN_ABLATION_HPP_
#define XDRE_TRAIN_ABLATION_HPP_

// Ablation variants as configuration overrides. Variants that only differ in
// inference-time debiasing settings share one trained model.

#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "xdre/train/pipeline.hpp"

namespace xdre::train {

struct Variant {
  std::string id;
  std::string label;
  std::vector<std::string> overrides;
};

inline const std::vector<Variant>& ablation_variants() {
  static const std::vector<Variant> v = {
      {"full", "Full model", {}},
      {"wo_rela", "w/o y_rela", {"debias.use_rela=false"}},
      {"wo_bias", "w/o y_bias", {"debias.use_bias=false"}},
      {"wo_rela_bias", "w/o y_rela, y_bias", {"debias.enabled=false"}},
      {"wo_nbe", "w/o NBE", {"graph.include_non_bridge=false"}},
      {"wo_grn", "w/o GRN", {"grn.timesteps=0"}},
      {"wo_rela_bias_nbe", "w/o y_rela, y_bias + NBE", {"debias.enabled=false", "graph.include_non_bridge=false"}},
      {"wo_rela_bias_sre", "w/o y_rela, y_bias + SRE", {"debias.enabled=false", "graph.semantic_edges=false"}},
  };
  return v;
}

inline const Variant& find_variant(const std::string& id) {
  for (const auto& v : ablation_variants()) {
    if (v.id == id) return v;
  }
  std::string valid;
  for (const auto& v : ablation_variants()) valid += (valid.empty() ? "" : ", ") + v.id;
  throw std::invalid_argument("unknown ablation variant '" + id + "'; valid names: " + valid);
}

inline util::Config variant_config(const util::Config& base, const Variant& v) {
  util::Config c = base;
  for (const auto& o : v.overrides) c.set_assignment(o);
  return c;
}

struct AblationRow {
  Variant variant;
  util::Config config;
  eval::EvalReport dev;
  std::optional<eval::EvalReport> test;
};

/// Configuration text without inference-only sections; equal keys share a trained model.
inline std::string training_key(const util::Config& c) {
  std::string key;
  for (const auto& [k, e] : c.entries()) {
    if (k.rfind("debias.", 0) == 0 || k.rfind("eval.", 0) == 0) continue;
    key += k + "=" + e.value + "\n";
  }
  return key;
}

inline std::vector<AblationRow> run_ablation(const util::Config& base, const data::Dataset& train, const data::Dataset& dev,
                                             const data::Dataset* test, const std::vector<std::string>& ids,
                                             const std::function<void(const std::string&)>& log = {}) {
  std::vector<const Variant*> chosen;
  for (const auto& id : ids) chosen.push_back(&find_variant(id));
  std::vector<AblationRow> rows;
  if (chosen.empty()) return rows;

  const int workers = static_cast<int>(base.get_int("eval.workers"));
  std::map<std::string, Trained> cache;
  const data::Dataset dev_p = prepare(base, dev);
  std::optional<data::Dataset> test_p;
  if (test) test_p = prepare(base, *test);
  for (const Variant* v : chosen) {
    util::Config cfg = variant_config(base, *v);
    const auto dc = debias_config(cfg);
    const std::string key = training_key(cfg);
    auto it = cache.find(key);
    if (it == cache.end()) {
      if (log) log("training model for variant " + v->id);
      it = cache.emplace(key, fit(cfg, train, &dev, false)).first;
    }
    Trained& t = it->second;
    if (dc.enabled && dc.use_rela && !t.aux.ready()) {
      if (log) log("training aux classifier for variant " + v->id);
      t.aux_loss_curve = debias::train_aux(*t.model, prepare(cfg, train), aux_config(cfg), train_config(cfg).seed, t.aux).loss_curve;
    }
    AblationRow row{*v, cfg, eval::evaluate(*t.model, &t.aux, dev_p, dc, workers), std::nullopt};
    if (test_p) row.test = eval::evaluate(*t.model, &t.aux, *test_p, dc, workers);
    if (log) log("variant " + v->id + ": dev micro-F1 " + std::to_string(row.dev.micro_f1));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string format_percent(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * *v);
  return buf;
}

/// Dev F1, AUC, P@500, P@1000, micro-F1 and test F1, AUC; percentages.
inline std::string ablation_markdown(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "| Model | Dev F1 | Dev AUC | Dev P@500 | Dev P@1000 | Dev micro-F1 | Test F1 | Test AUC |\n";
  os << "|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    os << "| " << r.variant.label << " | " << format_percent(r.dev.f1) << " | " << format_percent(r.dev.auc) << " | "
       << format_percent(r.dev.p_at_500) << " | " << format_percent(r.dev.p_at_1000) << " | " << format_percent(r.dev.micro_f1) << " | "
       << (r.test ? format_percent(r.test->f1) : "n/a") << " | " << (r.test ? format_percent(r.test->auc) : "n/a") << " |\n";
  }
  return os.str();
}

inline std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "variant,label,dev_f1,dev_auc,dev_p_at_500,dev_p_at_1000,dev_micro_f1,test_f1,test_auc\n";
  for (const auto& r : rows) {
    os << r.variant.id << ",\"" << r.variant.label << "\"," << format_percent(r.dev.f1) << "," << format_percent(r.dev.auc) << ","
       << format_percent(r.dev.p_at_500) << "," << format_percent(r.dev.p_at_1000) << "," << format_percent(r.dev.micro_f1) << ","
       << (r.test ? format_percent(r.test->f1) : "n/a") << "," << (r.test ? format_percent(r.test->auc) : "n/a") << "\n";
  }
  return os.str();
}

}  // namespace xdre::train

#endif  // XDRE_TRAIN_ABLATION_HPP_
