#ifndef XDRE_DATA_JSON_IO_HPP_
#define XDRE_DATA_JSON_IO_HPP_

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xdre/data/types.hpp"

namespace xdre::data {

using json = nlohmann::json;

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BagError {
  std::string bag_id;
  std::vector<std::string> problems;
};

struct LoadResult {
  Dataset dataset;
  std::vector<BagError> rejected;

  std::string report() const {
    std::ostringstream os;
    for (const auto& e : rejected) {
      os << "bag " << e.bag_id << ":\n";
      for (const auto& p : e.problems) os << "  - " << p << "\n";
    }
    return os.str();
  }
};

inline json to_json(const Document& doc) {
  json mentions = json::array();
  for (const auto& m : doc.mentions) {
    mentions.push_back({{"entity", m.entity}, {"sent", m.sent}, {"start", m.start}, {"end", m.end}});
  }
  return {{"sentences", doc.sentences}, {"mentions", std::move(mentions)}};
}

inline json to_json(const DocumentBag& bag) {
  json paths = json::array();
  for (const auto& p : bag.paths) paths.push_back({{"head_doc", to_json(p.head_doc)}, {"tail_doc", to_json(p.tail_doc)}});
  return {{"id", bag.id}, {"head", bag.head}, {"tail", bag.tail}, {"labels", bag.labels}, {"paths", std::move(paths)}};
}

inline json to_json(const Dataset& ds) {
  json bags = json::array();
  for (const auto& b : ds.bags) bags.push_back(to_json(b));
  return {{"label_space", ds.label_space.names()}, {"bags", std::move(bags)}};
}

inline Document document_from_json(const json& j) {
  Document doc;
  doc.sentences = j.at("sentences").get<std::vector<std::vector<std::string>>>();
  for (const auto& m : j.at("mentions")) {
    doc.mentions.push_back(Mention{m.at("entity").get<std::string>(), m.at("sent").get<int>(), m.at("start").get<int>(),
                                   m.at("end").get<int>()});
  }
  return doc;
}

inline DocumentBag bag_from_json(const json& j) {
  DocumentBag bag;
  bag.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
  bag.head = j.at("head").get<std::string>();
  bag.tail = j.at("tail").get<std::string>();
  bag.labels = j.at("labels").get<std::vector<int>>();
  for (const auto& p : j.at("paths")) {
    bag.paths.push_back(TextPath{document_from_json(p.at("head_doc")), document_from_json(p.at("tail_doc"))});
  }
  return bag;
}

/// Parses a dataset from canonical JSON text. Structurally broken bags (bad
/// field types, spans out of range, ...) are rejected and reported rather
/// than aborting the whole load. If `labels` is non-empty it must agree with
/// the file's label space (or supplies one when the file has none).
inline LoadResult parse_bags(const std::string& text, const LabelSpace& labels = {}) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DatasetError(std::string("malformed JSON: ") + e.what());
  }
  if (!root.is_object() || !root.contains("bags")) throw DatasetError("dataset JSON must be an object with a \"bags\" array");

  LoadResult result;
  if (root.contains("label_space")) {
    result.dataset.label_space = LabelSpace(root.at("label_space").get<std::vector<std::string>>());
    if (!labels.empty() && !(labels == result.dataset.label_space)) {
      throw DatasetError("label space in file differs from the expected label space");
    }
  } else if (!labels.empty()) {
    result.dataset.label_space = labels;
  } else {
    throw DatasetError("dataset has no label_space and none was supplied");
  }

  std::size_t index = 0;
  for (const auto& jb : root.at("bags")) {
    std::string id = jb.contains("id") ? (jb.at("id").is_string() ? jb.at("id").get<std::string>() : jb.at("id").dump())
                                       : "#" + std::to_string(index);
    ++index;
    DocumentBag bag;
    try {
      bag = bag_from_json(jb);
    } catch (const json::exception& e) {
      result.rejected.push_back({id, {std::string("schema error: ") + e.what()}});
      continue;
    }
    auto problems = validate_bag(bag, result.dataset.label_space);
    if (!problems.empty()) {
      result.rejected.push_back({id, std::move(problems)});
      continue;
    }
    result.dataset.bags.push_back(std::move(bag));
  }
  return result;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline LoadResult load_bags(const std::filesystem::path& path, const LabelSpace& labels = {}) {
  return parse_bags(read_file(path), labels);
}

/// Loads a dataset and fails if any bag is invalid.
inline Dataset load_dataset(const std::filesystem::path& path, const LabelSpace& labels = {}) {
  LoadResult r = load_bags(path, labels);
  if (!r.rejected.empty()) {
    throw DatasetError("validation failed for " + std::to_string(r.rejected.size()) + " bag(s) in '" + path.string() +
                       "':\n" + r.report());
  }
  return std::move(r.dataset);
}

inline std::string dump_bags(const Dataset& ds) { return to_json(ds).dump() + "\n"; }

inline void save_bags(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetError("cannot write '" + path.string() + "'");
  out << dump_bags(ds);
  if (!out) throw DatasetError("write failed for '" + path.string() + "'");
}

}  // namespace xdre::data

#endif  // XDRE_DATA_JSON_IO_HPP_
