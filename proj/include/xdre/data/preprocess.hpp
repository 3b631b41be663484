#ifndef XDRE_DATA_PREPROCESS_HPP_
#define XDRE_DATA_PREPROCESS_HPP_

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "xdre/data/types.hpp"

namespace xdre::data {

inline const std::string kMarker = "*";

namespace detail {

inline bool already_marked(const std::vector<std::string>& tokens, const Mention& m) {
  return m.start > 0 && m.end < static_cast<int>(tokens.size()) && tokens[static_cast<std::size_t>(m.start - 1)] == kMarker &&
         tokens[static_cast<std::size_t>(m.end)] == kMarker;
}

}  // namespace detail

/// Surrounds every mention with "*" tokens and re-indexes all spans.
/// Mentions that are already surrounded by markers are left alone, so the
/// operation is idempotent. Overlapping spans nest: at a shared boundary the
/// longer span opens first and the later-opened span closes first.
inline Document insert_markers(const Document& doc) {
  Document out;
  out.sentences.resize(doc.sentences.size());
  out.mentions = doc.mentions;

  for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
    const auto& tokens = doc.sentences[s];
    const int len = static_cast<int>(tokens.size());
    std::vector<std::size_t> fresh;
    for (std::size_t i = 0; i < doc.mentions.size(); ++i) {
      const auto& m = doc.mentions[i];
      if (m.sent == static_cast<int>(s) && !detail::already_marked(tokens, m)) fresh.push_back(i);
    }

    std::vector<std::vector<std::size_t>> opens(static_cast<std::size_t>(len) + 1), closes(static_cast<std::size_t>(len) + 1);
    for (std::size_t i : fresh) {
      opens[static_cast<std::size_t>(doc.mentions[i].start)].push_back(i);
      closes[static_cast<std::size_t>(doc.mentions[i].end)].push_back(i);
    }
    for (auto& v : opens) {
      std::sort(v.begin(), v.end(), [&](std::size_t a, std::size_t b) {
        const auto& ma = doc.mentions[a];
        const auto& mb = doc.mentions[b];
        return std::tie(mb.end, a) < std::tie(ma.end, b);  // longer first, then lower index
      });
    }
    for (auto& v : closes) {
      std::sort(v.begin(), v.end(), [&](std::size_t a, std::size_t b) {
        const auto& ma = doc.mentions[a];
        const auto& mb = doc.mentions[b];
        return std::tie(mb.start, b) < std::tie(ma.start, a);  // later start first, then higher index
      });
    }

    std::vector<std::string> marked;
    marked.reserve(tokens.size() + 2 * fresh.size());
    std::vector<int> new_pos(tokens.size(), 0);
    std::map<std::size_t, std::pair<int, int>> spans;
    for (int p = 0; p <= len; ++p) {
      for (std::size_t i : closes[static_cast<std::size_t>(p)]) {
        spans[i].second = static_cast<int>(marked.size());
        marked.push_back(kMarker);
      }
      for (std::size_t i : opens[static_cast<std::size_t>(p)]) {
        marked.push_back(kMarker);
        spans[i].first = static_cast<int>(marked.size());
      }
      if (p < len) {
        new_pos[static_cast<std::size_t>(p)] = static_cast<int>(marked.size());
        marked.push_back(tokens[static_cast<std::size_t>(p)]);
      }
    }
    for (std::size_t i = 0; i < out.mentions.size(); ++i) {
      auto& m = out.mentions[i];
      if (m.sent != static_cast<int>(s)) continue;
      auto it = spans.find(i);
      if (it != spans.end()) {
        m.start = it->second.first;
        m.end = it->second.second;
      } else {
        m.start = new_pos[static_cast<std::size_t>(m.start)];
        m.end = new_pos[static_cast<std::size_t>(m.end - 1)] + 1;
      }
    }
    out.sentences[s] = std::move(marked);
  }
  return out;
}

inline TextPath insert_markers(const TextPath& path) { return TextPath{insert_markers(path.head_doc), insert_markers(path.tail_doc)}; }

inline DocumentBag insert_markers(const DocumentBag& bag) {
  DocumentBag out = bag;
  for (auto& p : out.paths) p = insert_markers(p);
  return out;
}

/// Deletes every "*" token (the inverse of insert_markers on marker-free text).
inline std::vector<std::string> strip_markers(const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  for (const auto& t : tokens) {
    if (t != kMarker) out.push_back(t);
  }
  return out;
}

namespace detail {

struct SentenceRef {
  int doc = 0;
  int sent = 0;
  int distinct = 0;
  int length = 0;
};

/// Keeps a `width`-token window of sentence `sent` that contains the first
/// mention of `entity`; other mentions must lie fully inside the window.
inline void truncate_sentence(Document& doc, int sent, const std::string& entity, int width) {
  auto& tokens = doc.sentences[static_cast<std::size_t>(sent)];
  const int len = static_cast<int>(tokens.size());
  if (width >= len) return;
  const Mention* anchor = nullptr;
  for (const auto& m : doc.mentions) {
    if (m.sent == sent && m.entity == entity) {
      anchor = &m;
      break;
    }
  }
  // One token of left context keeps an opening marker inside the window.
  const int begin = anchor ? std::max(0, std::min(anchor->start - 1, len - width)) : 0;
  const int end = begin + width;
  std::vector<Mention> kept;
  for (auto m : doc.mentions) {
    if (m.sent != sent) {
      kept.push_back(m);
      continue;
    }
    const bool is_anchor = anchor && m.entity == anchor->entity && m.start == anchor->start && m.end == anchor->end;
    if (is_anchor) {
      m.start = std::max(m.start, begin) - begin;
      m.end = std::min(m.end, end) - begin;
      kept.push_back(m);
    } else if (m.start >= begin && m.end <= end) {
      m.start -= begin;
      m.end -= begin;
      kept.push_back(m);
    }
  }
  doc.mentions = std::move(kept);
  tokens = std::vector<std::string>(tokens.begin() + begin, tokens.begin() + end);
}

inline Document select_sentences(const Document& doc, const std::vector<bool>& keep) {
  Document out;
  std::vector<int> remap(doc.sentences.size(), -1);
  for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
    if (!keep[s]) continue;
    remap[s] = static_cast<int>(out.sentences.size());
    out.sentences.push_back(doc.sentences[s]);
  }
  for (const auto& m : doc.mentions) {
    const int to = remap[static_cast<std::size_t>(m.sent)];
    if (to < 0) continue;
    Mention moved = m;
    moved.sent = to;
    out.mentions.push_back(std::move(moved));
  }
  return out;
}

inline TextPath filter_path(const TextPath& path, const std::string& head, const std::string& tail, std::size_t budget,
                            std::vector<std::string>* warnings) {
  if (path.head_doc.token_count() + path.tail_doc.token_count() <= budget) return path;

  std::vector<SentenceRef> ranked;
  for (int d = 0; d < 2; ++d) {
    const Document& doc = path.doc(d);
    std::vector<std::set<std::string>> ents(doc.sentences.size());
    for (const auto& m : doc.mentions) ents[static_cast<std::size_t>(m.sent)].insert(m.entity);
    for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
      if (ents[s].empty()) continue;
      ranked.push_back({d, static_cast<int>(s), static_cast<int>(ents[s].size()), static_cast<int>(doc.sentences[s].size())});
    }
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const SentenceRef& a, const SentenceRef& b) {
    if (a.distinct != b.distinct) return a.distinct > b.distinct;
    return std::tie(a.doc, a.sent) < std::tie(b.doc, b.sent);
  });

  auto first_with = [&](int d, const std::string& entity) -> const SentenceRef* {
    const Document& doc = path.doc(d);
    for (const auto& r : ranked) {
      if (r.doc != d) continue;
      for (const auto& m : doc.mentions) {
        if (m.sent == r.sent && m.entity == entity) return &r;
      }
    }
    return nullptr;
  };
  const SentenceRef* head_ref = first_with(0, head);
  const SentenceRef* tail_ref = first_with(1, tail);
  if (!head_ref || !tail_ref) throw std::invalid_argument("filter_context: target entity has no mention in its document");

  TextPath work = path;
  std::vector<bool> keep_head(path.head_doc.sentences.size(), false), keep_tail(path.tail_doc.sentences.size(), false);
  keep_head[static_cast<std::size_t>(head_ref->sent)] = true;
  keep_tail[static_cast<std::size_t>(tail_ref->sent)] = true;
  const auto b = static_cast<int>(budget);
  int used = head_ref->length + tail_ref->length;
  if (used > b) {
    int head_width = head_ref->length;
    int tail_width = tail_ref->length;
    if (head_width <= b / 2) {
      tail_width = b - head_width;
    } else if (tail_width <= b / 2) {
      head_width = b - tail_width;
    } else {
      head_width = b - b / 2;
      tail_width = b / 2;
    }
    if (warnings) {
      warnings->push_back("target sentences exceed the path budget of " + std::to_string(budget) +
                          " tokens; truncated to " + std::to_string(head_width) + "+" + std::to_string(tail_width));
    }
    truncate_sentence(work.head_doc, head_ref->sent, head, head_width);
    truncate_sentence(work.tail_doc, tail_ref->sent, tail, tail_width);
    used = head_width + tail_width;
  }
  for (const auto& r : ranked) {
    auto& keep = r.doc == 0 ? keep_head : keep_tail;
    if (keep[static_cast<std::size_t>(r.sent)]) continue;
    if (used + r.length <= b) {
      keep[static_cast<std::size_t>(r.sent)] = true;
      used += r.length;
    }
  }
  return TextPath{select_sentences(work.head_doc, keep_head), select_sentences(work.tail_doc, keep_tail)};
}

}  // namespace detail

/// Entity-based context filter: shrinks every path whose head+tail token count
/// exceeds `budget` to the most entity-dense sentences that fit, always
/// keeping one sentence that mentions each target entity.
inline DocumentBag filter_context(const DocumentBag& bag, std::size_t budget = 512,
                                  std::vector<std::string>* warnings = nullptr) {
  if (budget < 2) throw std::invalid_argument("filter_context: budget must be at least 2 tokens");
  DocumentBag out = bag;
  for (auto& p : out.paths) p = detail::filter_path(p, bag.head, bag.tail, budget, warnings);
  return out;
}

}  // namespace xdre::data

#endif  // XDRE_DATA_PREPROCESS_HPP_
