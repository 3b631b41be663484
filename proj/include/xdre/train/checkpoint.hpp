#ifndef XDRE_TRAIN_CHECKPOINT_HPP_
#define XDRE_TRAIN_CHECKPOINT_HPP_

// Single-file archive: the magic "XDRECKPT", a little-endian u64 header
// length, a JSON header, then every tensor as little-endian float64 in the
// order the header lists them.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xdre/ad/params.hpp"
#include "xdre/data/types.hpp"

namespace xdre::train {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline constexpr char kCheckpointMagic[8] = {'X', 'D', 'R', 'E', 'C', 'K', 'P', 'T'};
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  std::string config;  // resolved configuration text
  data::LabelSpace labels;
  std::vector<std::string> vocabulary;  // toy backend tokens; empty otherwise
  ad::ParamSet<double> model;           // parameters used for inference
  ad::ParamSet<double> aux;             // empty before phase 2

  // Resumable training state.
  bool has_state = false;
  ad::ParamSet<double> state_params;
  ad::ParamSet<double> adam_m;
  ad::ParamSet<double> adam_v;
  long long adam_steps = 0;
  std::string rng;
  int epoch = 0;
  std::vector<double> loss_curve;
  std::vector<double> dev_curve;
  int best_epoch = 0;
  double best_score = -1;
  std::vector<double> aux_loss_curve;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  nlohmann::json header;
  header["version"] = kCheckpointVersion;
  header["config"] = c.config;
  header["labels"] = c.labels.names();
  header["vocabulary"] = c.vocabulary;
  header["has_state"] = c.has_state;
  header["adam_steps"] = c.adam_steps;
  header["rng"] = c.rng;
  header["epoch"] = c.epoch;
  header["loss_curve"] = c.loss_curve;
  header["dev_curve"] = c.dev_curve;
  header["best_epoch"] = c.best_epoch;
  header["best_score"] = c.best_score;
  header["aux_loss_curve"] = c.aux_loss_curve;
  nlohmann::json tensors = nlohmann::json::array();
  std::vector<const ad::Matrix<double>*> blobs;
  auto add = [&](const char* section, const ad::ParamSet<double>& ps) {
    for (const auto& [name, m] : ps.store()) {
      tensors.push_back({{"section", section}, {"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
      blobs.push_back(&m);
    }
  };
  add("model", c.model);
  add("aux", c.aux);
  if (c.has_state) {
    add("state", c.state_params);
    add("adam_m", c.adam_m);
    add("adam_v", c.adam_v);
  }
  header["tensors"] = tensors;
  const std::string text = header.dump();

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint '" + path.string() + "'");
    out.write(kCheckpointMagic, 8);
    const std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), 8);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto* m : blobs) out.write(reinterpret_cast<const char*>(m->data()), static_cast<std::streamsize>(m->size() * 8));
    if (!out) throw CheckpointError("short write to checkpoint '" + path.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  char magic[8];
  std::uint64_t len = 0;
  if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) throw CheckpointError("'" + path.string() + "' is not a checkpoint");
  if (!in.read(reinterpret_cast<char*>(&len), 8) || len > (1ull << 32)) throw CheckpointError("corrupt checkpoint header");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw CheckpointError("truncated checkpoint header");
  const auto h = nlohmann::json::parse(text);
  if (h.at("version").get<int>() != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version");

  Checkpoint c;
  c.config = h.at("config").get<std::string>();
  c.labels = data::LabelSpace(h.at("labels").get<std::vector<std::string>>());
  c.vocabulary = h.at("vocabulary").get<std::vector<std::string>>();
  c.has_state = h.at("has_state").get<bool>();
  c.adam_steps = h.at("adam_steps").get<long long>();
  c.rng = h.at("rng").get<std::string>();
  c.epoch = h.at("epoch").get<int>();
  c.loss_curve = h.at("loss_curve").get<std::vector<double>>();
  c.dev_curve = h.at("dev_curve").get<std::vector<double>>();
  c.best_epoch = h.at("best_epoch").get<int>();
  c.best_score = h.at("best_score").get<double>();
  c.aux_loss_curve = h.at("aux_loss_curve").get<std::vector<double>>();
  for (const auto& t : h.at("tensors")) {
    const std::string section = t.at("section");
    ad::Matrix<double> m(t.at("rows").get<Eigen::Index>(), t.at("cols").get<Eigen::Index>());
    if (!in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * 8))) throw CheckpointError("truncated checkpoint tensor data");
    ad::ParamSet<double>* target = section == "model" ? &c.model
                                   : section == "aux" ? &c.aux
                                   : section == "state" ? &c.state_params
                                   : section == "adam_m" ? &c.adam_m
                                   : section == "adam_v" ? &c.adam_v
                                                         : nullptr;
    if (!target) throw CheckpointError("unknown checkpoint section '" + section + "'");
    target->emplace(t.at("name").get<std::string>(), std::move(m));
  }
  return c;
}

}  // namespace xdre::train

#endif  // XDRE_TRAIN_CHECKPOINT_HPP_
