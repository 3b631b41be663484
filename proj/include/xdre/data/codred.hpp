#ifndef XDRE_DATA_CODRED_HPP_
#define XDRE_DATA_CODRED_HPP_

// Best-effort conversion of CodRED-style release files into the canonical
// bag schema. Accepted field names (first match wins):
//
//   bag file (JSON array or JSON lines), one record per bag:
//     head entity  "h" | "head"           tail entity  "t" | "tail"
//     relations    "relations" | "relation" | "label"   (string or list;
//                  "n/a", "NA" and "no_relation" map to NA)
//     paths        "paths" | "doc_pairs"  (list of [head_title, tail_title]
//                  or {"h": title, "t": title}); or a single "doc_h"/"doc_t"
//     id           "id" | "bag_id"        (defaults to "h|t")
//
//   document file (JSON array or JSON lines), one record per document:
//     title        "title" | "id"
//     tokens       "tokens": flat list, or a list of sentences
//     sentences    "sents" | "sentences": [start, end) token ranges for a
//                  flat token list; without them sentences end at . ! ?
//     entities     "entities": [{"id" | "Q": id, "spans" | "mentions":
//                  [[start, end), ...]}] in flat token offsets
//
// Mentions that cross a sentence boundary are clipped to their first sentence.

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xdre/data/json_io.hpp"
#include "xdre/data/types.hpp"

namespace xdre::data {

struct ConvertResult {
  Dataset dataset;
  std::vector<std::string> skipped;  // one message per dropped bag
};

namespace codred_detail {

using nlohmann::json;

inline std::vector<json> read_records(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  std::vector<json> out;
  if (first != std::string::npos && text[first] == '[') {
    for (auto& r : json::parse(text)) out.push_back(std::move(r));
    return out;
  }
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    const std::string line = text.substr(pos, nl - pos);
    if (line.find_first_not_of(" \t\r") != std::string::npos) out.push_back(json::parse(line));
    pos = nl + 1;
  }
  return out;
}

inline const json* field(const json& j, std::initializer_list<const char*> names) {
  for (const char* n : names) {
    auto it = j.find(n);
    if (it != j.end() && !it->is_null()) return &*it;
  }
  return nullptr;
}

inline bool is_na_name(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s == "n/a" || s == "na" || s == "no_relation" || s.empty();
}

inline Document convert_document(const json& rec) {
  const json* tok = field(rec, {"tokens"});
  if (!tok || !tok->is_array()) throw std::invalid_argument("document without a tokens array");
  std::vector<std::string> flat;
  std::vector<std::pair<int, int>> sents;
  if (!tok->empty() && (*tok)[0].is_array()) {
    for (const auto& s : *tok) {
      const int b = static_cast<int>(flat.size());
      for (const auto& t : s) flat.push_back(t.get<std::string>());
      sents.emplace_back(b, static_cast<int>(flat.size()));
    }
  } else {
    for (const auto& t : *tok) flat.push_back(t.get<std::string>());
    if (const json* s = field(rec, {"sents", "sentences"})) {
      for (const auto& r : *s) sents.emplace_back(r.at(0).get<int>(), r.at(1).get<int>());
    } else {
      int b = 0;
      for (int i = 0; i < static_cast<int>(flat.size()); ++i) {
        const auto& w = flat[static_cast<std::size_t>(i)];
        if (w == "." || w == "!" || w == "?") {
          sents.emplace_back(b, i + 1);
          b = i + 1;
        }
      }
      if (b < static_cast<int>(flat.size())) sents.emplace_back(b, static_cast<int>(flat.size()));
    }
  }
  Document doc;
  for (const auto& [b, e] : sents) {
    if (b < 0 || e > static_cast<int>(flat.size()) || b >= e) throw std::invalid_argument("document sentence range out of bounds");
    doc.sentences.emplace_back(flat.begin() + b, flat.begin() + e);
  }
  if (const json* ents = field(rec, {"entities"})) {
    for (const auto& ent : *ents) {
      const json* id = field(ent, {"id", "Q"});
      const json* spans = field(ent, {"spans", "mentions"});
      if (!id || !spans) continue;
      const std::string eid = id->is_string() ? id->get<std::string>() : id->dump();
      for (const auto& sp : *spans) {
        const int start = sp.at(0).get<int>();
        const int end = sp.at(1).get<int>();
        for (std::size_t s = 0; s < sents.size(); ++s) {
          if (start >= sents[s].first && start < sents[s].second) {
            const int clipped = std::min(end, sents[s].second);
            if (clipped > start) doc.mentions.push_back({eid, static_cast<int>(s), start - sents[s].first, clipped - sents[s].first});
            break;
          }
        }
      }
    }
  }
  return doc;
}

}  // namespace codred_detail

/// `labels` fixes the label space when non-empty; otherwise it is NA plus
/// every relation name seen, sorted.
inline ConvertResult convert_codred(const std::filesystem::path& bag_file, const std::filesystem::path& doc_file,
                                    const LabelSpace& labels = {}) {
  using codred_detail::field;
  std::map<std::string, Document> docs;
  for (const auto& rec : codred_detail::read_records(doc_file)) {
    const auto* title = field(rec, {"title", "id"});
    if (!title) continue;
    docs.emplace(title->get<std::string>(), codred_detail::convert_document(rec));
  }

  const auto records = codred_detail::read_records(bag_file);
  std::vector<std::vector<std::string>> rel_names(records.size());
  std::set<std::string> seen;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (const auto* r = field(records[i], {"relations", "relation", "label"})) {
      if (r->is_array()) {
        for (const auto& x : *r) rel_names[i].push_back(x.get<std::string>());
      } else {
        rel_names[i].push_back(r->get<std::string>());
      }
    }
    for (const auto& n : rel_names[i]) {
      if (!codred_detail::is_na_name(n)) seen.insert(n);
    }
  }
  ConvertResult out;
  if (labels.empty()) {
    std::vector<std::string> names{"NA"};
    names.insert(names.end(), seen.begin(), seen.end());
    if (names.size() < 2) names.push_back("relation");
    out.dataset.label_space = LabelSpace(names);
  } else {
    out.dataset.label_space = labels;
  }
  const LabelSpace& ls = out.dataset.label_space;

  std::set<std::string> ids;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    DocumentBag bag;
    const auto* h = field(rec, {"h", "head"});
    const auto* t = field(rec, {"t", "tail"});
    if (!h || !t) {
      out.skipped.push_back("record " + std::to_string(i) + ": missing head or tail entity");
      continue;
    }
    bag.head = h->is_string() ? h->get<std::string>() : h->dump();
    bag.tail = t->is_string() ? t->get<std::string>() : t->dump();
    const auto* id = field(rec, {"id", "bag_id"});
    bag.id = id ? (id->is_string() ? id->get<std::string>() : id->dump()) : bag.head + "|" + bag.tail;
    if (!ids.insert(bag.id).second) bag.id += "#" + std::to_string(i);

    std::set<int> label_set;
    bool bad_label = false;
    for (const auto& n : rel_names[i]) {
      if (codred_detail::is_na_name(n)) continue;
      try {
        label_set.insert(ls.index_of(n));
      } catch (const std::out_of_range&) {
        bad_label = true;
      }
    }
    if (bad_label) {
      out.skipped.push_back(bag.id + ": relation outside the label space");
      continue;
    }
    bag.labels.assign(label_set.begin(), label_set.end());
    if (bag.labels.empty()) bag.labels.push_back(LabelSpace::kNa);

    std::vector<std::pair<std::string, std::string>> pairs;
    if (const auto* ps = field(rec, {"paths", "doc_pairs"})) {
      for (const auto& p : *ps) {
        if (p.is_array()) {
          pairs.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
        } else {
          pairs.emplace_back(p.at("h").get<std::string>(), p.at("t").get<std::string>());
        }
      }
    } else if (const auto* dh = field(rec, {"doc_h"}); dh && field(rec, {"doc_t"})) {
      pairs.emplace_back(dh->get<std::string>(), field(rec, {"doc_t"})->get<std::string>());
    }
    std::string why;
    for (const auto& [hd, td] : pairs) {
      auto hi = docs.find(hd);
      auto ti = docs.find(td);
      if (hi == docs.end() || ti == docs.end()) {
        why = "document '" + (hi == docs.end() ? hd : td) + "' not found";
        continue;
      }
      TextPath path{hi->second, ti->second};
      if (!path.head_doc.mentions_entity(bag.head) || !path.tail_doc.mentions_entity(bag.tail)) {
        why = "target entity not mentioned in its document";
        continue;
      }
      bag.paths.push_back(std::move(path));
    }
    if (bag.paths.empty()) {
      out.skipped.push_back(bag.id + ": no usable text path" + (why.empty() ? "" : " (" + why + ")"));
      continue;
    }
    if (const auto errors = validate_bag(bag, ls); !errors.empty()) {
      out.skipped.push_back(bag.id + ": " + errors.front());
      continue;
    }
    out.dataset.bags.push_back(std::move(bag));
  }
  return out;
}

}  // namespace xdre::data

#endif  // XDRE_DATA_CODRED_HPP_
