#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "xdre/xdre.hpp"

namespace fs = std::filesystem;
using namespace xdre;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string fmt(const std::optional<double>& v) { return train::format_percent(v); }

std::string report_table(const eval::EvalReport& r) {
  char buf[64];
  std::ostringstream os;
  os << "metric        value\n";
  os << "F1            " << fmt(r.f1) << "\n";
  os << "AUC           " << fmt(r.auc) << "\n";
  os << "P@500         " << fmt(r.p_at_500) << "\n";
  os << "P@1000        " << fmt(r.p_at_1000) << "\n";
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * r.micro_f1);
  os << "micro-F1      " << buf << "\n";
  os << "bags          " << r.bags << "\n";
  os << "gold pairs    " << r.gold_positives << "\n";
  return os.str();
}

// Layering: defaults, $XDRE_CONFIG, --config file, --set assignments.
struct ConfigFlags {
  std::string file;
  std::vector<std::string> sets;

  void add(CLI::App* app) {
    app->add_option("--config", file, "configuration file (key = value, dotted keys)")->check(CLI::ExistingFile);
    app->add_option("--set", sets, "override one key, e.g. --set grn.timesteps=0")->take_all();
  }

  void apply(util::Config& c) const {
    if (!file.empty()) c.merge_file(file);
    for (const auto& s : sets) c.set_assignment(s);
  }
};

void apply_debias_flags(util::Config& c, const std::string& debias, const std::optional<double>& lambda) {
  if (!debias.empty()) c.set("debias.enabled", debias == "on" ? "true" : "false");
  if (lambda) c.set("debias.lambda", std::to_string(*lambda));
}

std::string format_lambda(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

int run_synth(std::uint64_t seed, int bags, double na, int relations, int vocab, const std::string& out) {
  const auto ds = data::synth_generate(seed, bags, na, data::LabelSpace::synthetic(relations), vocab);
  data::save_bags(ds, out);
  std::cerr << "wrote " << ds.bags.size() << " bags (" << ds.na_count() << " NA) to " << out << "\n";
  return 0;
}

int run_validate(const std::vector<std::string>& files) {
  int bad = 0;
  for (const auto& f : files) {
    const auto r = data::load_bags(f);
    if (r.rejected.empty()) {
      std::cout << f << ": " << r.dataset.bags.size() << " bags OK\n";
    } else {
      ++bad;
      std::cout << f << ": " << r.dataset.bags.size() << " valid, " << r.rejected.size() << " rejected\n";
      std::cerr << r.report();
    }
  }
  return bad == 0 ? 0 : 1;
}

struct TrainFlags {
  std::string data, dev, resume, out = "run";
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
  bool phase2 = false;
  int workers = 0;
  ConfigFlags cfg;
};

int run_train(const TrainFlags& f) {
  std::optional<train::Checkpoint> resume;
  util::Config cfg;
  if (!f.resume.empty()) {
    resume = train::load_checkpoint(f.resume);
    cfg = train::config_from_text(resume->config);
  } else {
    cfg = base_config();
  }
  f.cfg.apply(cfg);
  if (f.epochs) cfg.set("train.epochs", std::to_string(*f.epochs));
  if (f.seed) cfg.set("train.seed", std::to_string(*f.seed));
  if (f.workers > 0) cfg.set("eval.workers", std::to_string(f.workers));
  // Validates every section before any work starts.
  model_config(cfg);
  debias_config(cfg);
  const auto tc = train_config(cfg);
  aux_config(cfg);
  const int workers = static_cast<int>(cfg.get_int("eval.workers"));

  const auto train_ds = data::load_dataset(f.data);
  std::optional<data::Dataset> dev_ds;
  if (!f.dev.empty()) dev_ds = data::load_dataset(f.dev, train_ds.label_space);

  const fs::path out(f.out);
  fs::create_directories(out);
  write_text(out / "config.toml", cfg.to_text());
  const auto vocabulary = resume ? resume->vocabulary : train::vocabulary_for(cfg, train::prepare(cfg, train_ds));

  auto write_curve = [&](const train::TrainState<train::Real>& st) {
    std::ostringstream os;
    os.precision(17);
    os << "epoch,loss,dev_score\n";
    for (std::size_t i = 0; i < st.loss_curve.size(); ++i) {
      os << i + 1 << "," << st.loss_curve[i] << ",";
      if (i < st.dev_curve.size()) os << st.dev_curve[i];
      os << "\n";
    }
    write_text(out / "loss_curve.csv", os.str());
  };

  train::FitCallbacks cb;
  cb.on_epoch = [&](const train::TrainState<train::Real>& st, const train::EpochInfo& info) {
    std::cerr << "epoch " << info.epoch << "/" << tc.epochs << " loss " << info.loss;
    if (info.dev_score) std::cerr << " dev " << *info.dev_score << (info.improved ? " *" : "");
    std::cerr << "\n";
    const auto ck = train::to_checkpoint(cfg, vocabulary, train_ds.label_space, st.best, nullptr, &st);
    train::save_checkpoint(ck, out / "checkpoint.xdre");
    write_curve(st);
  };
  cb.on_aux_epoch = [](int epoch, double loss) { std::cerr << "aux epoch " << epoch << " loss " << loss << "\n"; };

  const auto t = train::fit(cfg, train_ds, dev_ds ? &*dev_ds : nullptr, f.phase2, cb, resume ? &*resume : nullptr, workers);
  train::save_checkpoint(train::to_checkpoint(t), out / "checkpoint.xdre");
  write_curve(t.state);
  if (f.phase2) {
    std::ostringstream os;
    os.precision(17);
    os << "epoch,loss\n";
    for (std::size_t i = 0; i < t.aux_loss_curve.size(); ++i) os << i + 1 << "," << t.aux_loss_curve[i] << "\n";
    write_text(out / "aux_loss_curve.csv", os.str());
  }
  std::cerr << "checkpoint: " << (out / "checkpoint.xdre").string() << " (best epoch " << t.state.best_epoch << ")\n";
  return 0;
}

struct EvalFlags {
  std::string checkpoint, data, report = "eval_report.json", export_path, ablate, train_data, test;
  std::string debias;
  std::optional<double> lambda;
  int workers = 0;
  std::vector<std::string> sets;
};

int run_ablation_report(util::Config base, const std::string& train_path, const std::string& dev_path, const std::string& test_path,
                        const std::vector<std::string>& ids, const std::string& report) {
  const auto train_ds = data::load_dataset(train_path);
  const auto dev_ds = data::load_dataset(dev_path, train_ds.label_space);
  std::optional<data::Dataset> test_ds;
  if (!test_path.empty()) test_ds = data::load_dataset(test_path, train_ds.label_space);
  const auto rows = train::run_ablation(base, train_ds, dev_ds, test_ds ? &*test_ds : nullptr, ids,
                                        [](const std::string& m) { std::cerr << m << "\n"; });
  const std::string md = train::ablation_markdown(rows);
  std::cout << md;
  if (!report.empty()) {
    nlohmann::json j;
    j["config"] = base.to_text();
    j["variants"] = nlohmann::json::array();
    for (const auto& r : rows) {
      nlohmann::json v{{"id", r.variant.id}, {"label", r.variant.label}, {"config", r.config.to_text()}, {"dev", eval::to_json(r.dev)}};
      if (r.test) v["test"] = eval::to_json(*r.test);
      j["variants"].push_back(std::move(v));
    }
    const fs::path p(report);
    write_text(p, j.dump(2) + "\n");
    fs::path md_path = p, csv_path = p;
    write_text(md_path.replace_extension(".md"), md);
    write_text(csv_path.replace_extension(".csv"), train::ablation_csv(rows));
  }
  return 0;
}

int run_eval(const EvalFlags& f) {
  const auto ck = train::load_checkpoint(f.checkpoint);
  std::vector<std::string> overrides = f.sets;
  if (!f.debias.empty()) overrides.push_back(std::string("debias.enabled=") + (f.debias == "on" ? "true" : "false"));
  if (f.lambda) overrides.push_back("debias.lambda=" + format_lambda(*f.lambda));
  if (f.workers > 0) overrides.push_back("eval.workers=" + std::to_string(f.workers));

  if (!f.ablate.empty()) {
    if (f.train_data.empty()) throw std::invalid_argument("--ablate needs --train (training set) with --data as the dev set");
    util::Config base = train::config_from_text(ck.config);
    for (const auto& o : overrides) base.set_assignment(o);
    return run_ablation_report(base, f.train_data, f.data, f.test, split_list(f.ablate), f.report);
  }

  auto t = train::restore(ck, overrides);
  const auto dc = debias_config(t.config);
  const int workers = static_cast<int>(t.config.get_int("eval.workers"));
  const auto raw = data::load_dataset(f.data, ck.labels);
  const auto ds = train::prepare(t.config, raw);
  const auto scored = eval::score_dataset(*t.model, &t.aux, ds, dc, workers);
  const auto preds = eval::predictions(scored);
  const auto ranked = eval::rank_predictions(preds);
  const auto report = eval::compute_metrics(ranked, preds, ck.labels);
  std::cout << report_table(report);
  nlohmann::json j = eval::to_json(report);
  j["config"] = t.config.to_text();
  j["checkpoint"] = f.checkpoint;
  j["data"] = f.data;
  write_text(f.report, j.dump(2) + "\n");
  if (!f.export_path.empty()) write_text(f.export_path, eval::export_jsonl(ranked, ck.labels));
  return 0;
}

int run_convert(const std::string& bags, const std::string& docs, const std::string& labels_path, const std::string& out) {
  data::LabelSpace labels;
  if (!labels_path.empty()) {
    std::ifstream in(labels_path);
    if (!in) throw std::runtime_error("cannot open '" + labels_path + "'");
    std::vector<std::string> names;
    for (std::string line; std::getline(in, line);) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) names.push_back(line);
    }
    labels = data::LabelSpace(names);
  }
  const auto r = data::convert_codred(bags, docs, labels);
  for (const auto& s : r.skipped) std::cerr << "skipped " << s << "\n";
  if (r.dataset.bags.empty()) throw std::runtime_error("no bag could be converted");
  data::save_bags(r.dataset, out);
  std::cerr << "wrote " << r.dataset.bags.size() << " bags, skipped " << r.skipped.size() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-document relation extraction toolkit"};
  app.require_subcommand(1);
  int rc = 0;

  // synth
  std::uint64_t synth_seed = 13;
  int synth_bags = 0, synth_relations = 4, synth_vocab = 60;
  double synth_na = 0.85;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--bags", synth_bags, "number of bags")->required()->check(CLI::PositiveNumber);
  synth->add_option("--na", synth_na, "fraction of NA bags")->check(CLI::Range(0.0, 1.0));
  synth->add_option("--relations", synth_relations, "number of non-NA relations")->check(CLI::PositiveNumber);
  synth->add_option("--vocab", synth_vocab, "filler vocabulary size")->check(CLI::PositiveNumber);
  synth->add_option("-o,--out", synth_out, "output dataset file")->required();
  synth->callback([&] { rc = run_synth(synth_seed, synth_bags, synth_na, synth_relations, synth_vocab, synth_out); });

  // validate
  std::vector<std::string> validate_files;
  auto* validate = app.add_subcommand("validate", "check dataset files against the schema");
  validate->add_option("files,--data", validate_files, "dataset files")->required()->check(CLI::ExistingFile);
  validate->callback([&] { rc = run_validate(validate_files); });

  // train
  TrainFlags tf;
  auto* trn = app.add_subcommand("train", "train a model; writes checkpoint, loss curve and resolved config");
  trn->add_option("--data", tf.data, "training set")->required()->check(CLI::ExistingFile);
  trn->add_option("--dev", tf.dev, "dev set for model selection")->check(CLI::ExistingFile);
  trn->add_option("--epochs", tf.epochs, "override train.epochs");
  trn->add_option("--seed", tf.seed, "override train.seed");
  trn->add_option("--resume", tf.resume, "continue from a checkpoint")->check(CLI::ExistingFile);
  trn->add_flag("--phase2", tf.phase2, "also train the auxiliary classifier");
  trn->add_option("--out", tf.out, "output directory")->capture_default_str();
  trn->add_option("--workers", tf.workers, "parallel evaluation threads")->check(CLI::NonNegativeNumber);
  tf.cfg.add(trn);
  trn->callback([&] { rc = run_train(tf); });

  // eval
  EvalFlags ef;
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("--checkpoint", ef.checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  ev->add_option("--data", ef.data, "evaluation set")->required()->check(CLI::ExistingFile);
  ev->add_option("--debias", ef.debias, "calibrated scores on|off")->check(CLI::IsMember({"on", "off"}));
  ev->add_option("--lambda", ef.lambda, "calibration weight");
  ev->add_option("--report", ef.report, "JSON report path")->capture_default_str();
  ev->add_option("--export", ef.export_path, "write ranked predictions as JSON lines");
  ev->add_option("--ablate", ef.ablate, "comma-separated ablation variants (trains each; needs --train)");
  ev->add_option("--train", ef.train_data, "training set for --ablate")->check(CLI::ExistingFile);
  ev->add_option("--test", ef.test, "optional test set for --ablate")->check(CLI::ExistingFile);
  ev->add_option("--workers", ef.workers, "parallel evaluation threads")->check(CLI::NonNegativeNumber);
  ev->add_option("--set", ef.sets, "override an inference key, e.g. --set debias.mask_rate=0.3")->take_all();
  ev->callback([&] { rc = run_eval(ef); });

  // ablate
  std::string ab_data, ab_dev, ab_test, ab_variants, ab_report = "ablation.json", ab_debias;
  std::optional<int> ab_epochs;
  std::optional<std::uint64_t> ab_seed;
  std::optional<double> ab_lambda;
  int ab_workers = 0;
  ConfigFlags ab_cfg;
  auto* ab = app.add_subcommand("ablate", "train and evaluate ablation variants");
  ab->add_option("--data", ab_data, "training set")->required()->check(CLI::ExistingFile);
  ab->add_option("--dev", ab_dev, "dev set")->required()->check(CLI::ExistingFile);
  ab->add_option("--test", ab_test, "optional test set")->check(CLI::ExistingFile);
  ab->add_option("--variants", ab_variants, "comma-separated variant ids (default: all)");
  ab->add_option("--epochs", ab_epochs, "override train.epochs");
  ab->add_option("--seed", ab_seed, "override train.seed");
  ab->add_option("--lambda", ab_lambda, "calibration weight");
  ab->add_option("--debias", ab_debias, "base debiasing on|off")->check(CLI::IsMember({"on", "off"}));
  ab->add_option("--report", ab_report, "JSON report path; .md and .csv written alongside")->capture_default_str();
  ab->add_option("--workers", ab_workers, "parallel evaluation threads")->check(CLI::NonNegativeNumber);
  ab_cfg.add(ab);
  ab->callback([&] {
    util::Config c = base_config();
    ab_cfg.apply(c);
    if (ab_epochs) c.set("train.epochs", std::to_string(*ab_epochs));
    if (ab_seed) c.set("train.seed", std::to_string(*ab_seed));
    if (ab_workers > 0) c.set("eval.workers", std::to_string(ab_workers));
    apply_debias_flags(c, ab_debias, std::nullopt);
    if (ab_lambda) c.set("debias.lambda", format_lambda(*ab_lambda));
    std::vector<std::string> ids = split_list(ab_variants);
    if (ids.empty()) {
      for (const auto& v : train::ablation_variants()) ids.push_back(v.id);
    }
    rc = run_ablation_report(c, ab_data, ab_dev, ab_test, ids, ab_report);
  });

  // convert-codred
  std::string cv_bags, cv_docs, cv_labels, cv_out;
  auto* cv = app.add_subcommand("convert-codred", "convert CodRED-style files to the dataset schema");
  cv->add_option("--bags", cv_bags, "bag records (JSON array or JSON lines)")->required()->check(CLI::ExistingFile);
  cv->add_option("--docs", cv_docs, "document records (JSON array or JSON lines)")->required()->check(CLI::ExistingFile);
  cv->add_option("--labels", cv_labels, "label names, one per line, NA first")->check(CLI::ExistingFile);
  cv->add_option("-o,--out", cv_out, "output dataset file")->required();
  cv->callback([&] { rc = run_convert(cv_bags, cv_docs, cv_labels, cv_out); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
