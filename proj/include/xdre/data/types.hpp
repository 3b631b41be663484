#ifndef XDRE_DATA_TYPES_HPP_
#define XDRE_DATA_TYPES_HPP_

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace xdre::data {

/// Ordered relation inventory; index 0 is always "NA".
class LabelSpace {
 public:
  static constexpr int kNa = 0;

  LabelSpace() = default;
  explicit LabelSpace(std::vector<std::string> names) : names_(std::move(names)) { validate(); }

  /// "NA" followed by `relations` generated names rel_1 ... rel_K.
  static LabelSpace synthetic(int relations) {
    std::vector<std::string> names{"NA"};
    for (int r = 1; r <= relations; ++r) names.push_back("rel_" + std::to_string(r));
    return LabelSpace(std::move(names));
  }

  void validate() const {
    if (names_.size() < 2) throw std::invalid_argument("label space needs NA plus at least one relation");
    if (names_.front() != "NA") throw std::invalid_argument("label space index 0 must be \"NA\"");
    std::set<std::string> seen(names_.begin(), names_.end());
    if (seen.size() != names_.size()) throw std::invalid_argument("label space names must be unique");
  }

  int size() const { return static_cast<int>(names_.size()); }
  bool empty() const { return names_.empty(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(int index) const { return names_.at(static_cast<std::size_t>(index)); }

  int index_of(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw std::out_of_range("unknown relation '" + name + "'");
    return static_cast<int>(it - names_.begin());
  }

  bool operator==(const LabelSpace&) const = default;

 private:
  std::vector<std::string> names_;
};

/// Entity mention; offsets are sentence-local token indices [start, end).
struct Mention {
  std::string entity;
  int sent = 0;
  int start = 0;
  int end = 0;

  bool operator==(const Mention&) const = default;
};

struct Document {
  std::vector<std::vector<std::string>> sentences;
  std::vector<Mention> mentions;

  std::size_t token_count() const {
    std::size_t n = 0;
    for (const auto& s : sentences) n += s.size();
    return n;
  }

  /// Token offset of each sentence in the flattened document.
  std::vector<std::size_t> sentence_offsets() const {
    std::vector<std::size_t> off(sentences.size(), 0);
    std::size_t at = 0;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      off[i] = at;
      at += sentences[i].size();
    }
    return off;
  }

  std::vector<std::string> flat_tokens() const {
    std::vector<std::string> out;
    out.reserve(token_count());
    for (const auto& s : sentences) out.insert(out.end(), s.begin(), s.end());
    return out;
  }

  bool mentions_entity(const std::string& id) const {
    return std::any_of(mentions.begin(), mentions.end(), [&](const Mention& m) { return m.entity == id; });
  }

  std::set<std::string> entities() const {
    std::set<std::string> out;
    for (const auto& m : mentions) out.insert(m.entity);
    return out;
  }

  bool operator==(const Document&) const = default;
};

struct TextPath {
  Document head_doc;
  Document tail_doc;

  const Document& doc(int index) const { return index == 0 ? head_doc : tail_doc; }
  Document& doc(int index) { return index == 0 ? head_doc : tail_doc; }

  bool operator==(const TextPath&) const = default;
};

struct DocumentBag {
  std::string id;
  std::string head;
  std::string tail;
  std::vector<int> labels;
  std::vector<TextPath> paths;

  bool is_na() const { return labels.size() == 1 && labels.front() == LabelSpace::kNa; }
  bool has_label(int r) const { return std::find(labels.begin(), labels.end(), r) != labels.end(); }

  /// Non-NA gold relations.
  std::vector<int> positive_labels() const {
    std::vector<int> out;
    for (int l : labels) {
      if (l != LabelSpace::kNa) out.push_back(l);
    }
    return out;
  }

  bool operator==(const DocumentBag&) const = default;
};

struct Dataset {
  LabelSpace label_space;
  std::vector<DocumentBag> bags;
  std::string split;

  std::size_t na_count() const {
    return static_cast<std::size_t>(std::count_if(bags.begin(), bags.end(), [](const DocumentBag& b) { return b.is_na(); }));
  }

  bool operator==(const Dataset&) const = default;
};

/// Structural problems with one bag; empty when the bag is valid.
inline std::vector<std::string> validate_bag(const DocumentBag& bag, const LabelSpace& labels) {
  std::vector<std::string> errs;
  if (bag.head.empty() || bag.tail.empty()) errs.push_back("missing head or tail entity id");
  if (bag.head == bag.tail) errs.push_back("head and tail entity ids are identical");
  if (bag.paths.empty()) errs.push_back("bag has no text paths");
  if (bag.labels.empty()) errs.push_back("bag has no labels");
  for (int l : bag.labels) {
    if (l < 0 || l >= labels.size()) errs.push_back("label index " + std::to_string(l) + " outside label space");
  }
  if (bag.labels.size() > 1 && bag.has_label(LabelSpace::kNa)) errs.push_back("NA combined with other labels");
  for (std::size_t k = 0; k < bag.paths.size(); ++k) {
    const auto& path = bag.paths[k];
    for (int d = 0; d < 2; ++d) {
      const Document& doc = path.doc(d);
      const char* which = d == 0 ? "head_doc" : "tail_doc";
      for (const auto& m : doc.mentions) {
        const std::string where = "path " + std::to_string(k) + " " + which + " mention of '" + m.entity + "'";
        if (m.entity.empty()) errs.push_back(where + ": empty entity id");
        if (m.sent < 0 || static_cast<std::size_t>(m.sent) >= doc.sentences.size()) {
          errs.push_back(where + ": sentence index " + std::to_string(m.sent) + " out of range");
          continue;
        }
        const auto len = static_cast<int>(doc.sentences[static_cast<std::size_t>(m.sent)].size());
        if (m.start < 0 || m.start >= m.end || m.end > len) {
          errs.push_back(where + ": span [" + std::to_string(m.start) + "," + std::to_string(m.end) +
                         ") out of range for sentence of length " + std::to_string(len));
        }
      }
    }
    if (!path.head_doc.mentions_entity(bag.head)) errs.push_back("path " + std::to_string(k) + ": head entity not mentioned in head_doc");
    if (!path.tail_doc.mentions_entity(bag.tail)) errs.push_back("path " + std::to_string(k) + ": tail entity not mentioned in tail_doc");
  }
  return errs;
}

}  // namespace xdre::data

#endif  // XDRE_DATA_TYPES_HPP_
