#ifndef XDRE_DATA_SYNTH_HPP_
#define XDRE_DATA_SYNTH_HPP_

// Synthetic bag generator for desk-scale experiments.
//
// Every bag has a head and a tail entity, 1..max_paths text paths and a few
// non-target entities per document. In a bag labeled with relation r, each
// planted path carries one non-bridge entity next to the head whose mention
// reads "pat<r> <word>" and one next to the tail with the same pattern token.
// Target sentences never contain the pattern, so the label is only
// recoverable through non-bridge entities. NA bags have the same layout with
// an ordinary word where the pattern token would be.

#include <algorithm>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "xdre/data/types.hpp"

namespace xdre::data {

struct SynthOptions {
  int max_paths = 3;
  int min_sentence = 4;
  int max_sentence = 8;
  int max_noise_entities = 2;  // per document
  double bridge_prob = 0.4;    // per path
  double filler_prob = 0.5;    // per document
  double extra_plant_prob = 0.5;  // planting in paths after the first
};

inline std::string pattern_token(int relation) { return "pat" + std::to_string(relation); }

namespace detail {

class SynthRng {
 public:
  explicit SynthRng(std::uint64_t seed) : gen_(seed) {}
  int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(gen_); }
  bool chance(double p) { return uniform() < p; }
  std::mt19937_64& gen() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

struct SentenceSpec {
  std::vector<std::string> tokens;
  std::vector<Mention> mentions;  // sent field filled in later
};

inline std::string word(SynthRng& rng, int vocab) { return "w" + std::to_string(rng.uniform_int(0, vocab - 1)); }

inline SentenceSpec sentence_with(SynthRng& rng, int vocab, const SynthOptions& opt,
                                  const std::vector<std::pair<std::string, std::vector<std::string>>>& entities) {
  SentenceSpec s;
  const int len = rng.uniform_int(opt.min_sentence, opt.max_sentence);
  std::vector<std::string> filler;
  for (int i = 0; i < len; ++i) filler.push_back(word(rng, vocab));
  // Interleave mentions at sorted random slots inside the filler words.
  std::vector<int> slots;
  for (std::size_t i = 0; i < entities.size(); ++i) slots.push_back(rng.uniform_int(0, len));
  std::sort(slots.begin(), slots.end());
  std::size_t next = 0;
  for (int pos = 0; pos <= len; ++pos) {
    while (next < entities.size() && slots[next] == pos) {
      const auto& [id, name] = entities[next];
      Mention m{id, 0, static_cast<int>(s.tokens.size()), static_cast<int>(s.tokens.size() + name.size())};
      s.tokens.insert(s.tokens.end(), name.begin(), name.end());
      s.mentions.push_back(std::move(m));
      ++next;
    }
    if (pos < len) s.tokens.push_back(filler[static_cast<std::size_t>(pos)]);
  }
  return s;
}

inline Document assemble(std::vector<SentenceSpec> sentences, SynthRng& rng) {
  std::shuffle(sentences.begin(), sentences.end(), rng.gen());
  Document doc;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    for (auto m : sentences[i].mentions) {
      m.sent = static_cast<int>(i);
      doc.mentions.push_back(std::move(m));
    }
    doc.sentences.push_back(std::move(sentences[i].tokens));
  }
  return doc;
}

}  // namespace detail

/// Deterministic synthetic dataset; see the file comment for the layout.
inline Dataset synth_generate(std::uint64_t seed, int n_bags, double na_fraction, const LabelSpace& labels,
                              int vocab_size, const SynthOptions& opt = {}) {
  if (n_bags < 1) throw std::invalid_argument("synth_generate: n_bags must be >= 1");
  if (!(na_fraction >= 0.0 && na_fraction <= 1.0)) throw std::invalid_argument("synth_generate: na_fraction must lie in [0,1]");
  if (vocab_size < 1) throw std::invalid_argument("synth_generate: vocab_size must be >= 1");
  labels.validate();

  detail::SynthRng rng(seed);
  Dataset ds;
  ds.label_space = labels;
  const int relations = labels.size() - 1;

  for (int b = 0; b < n_bags; ++b) {
    DocumentBag bag;
    bag.id = "bag" + std::to_string(b);
    bag.head = bag.id + "_h";
    bag.tail = bag.id + "_t";
    const bool na = rng.uniform() < na_fraction;
    const int relation = na ? LabelSpace::kNa : rng.uniform_int(1, relations);
    bag.labels = {relation};

    const std::vector<std::string> head_name{detail::word(rng, vocab_size)};
    const std::vector<std::string> tail_name{detail::word(rng, vocab_size)};
    int next_entity = 0;
    auto fresh_entity = [&]() { return bag.id + "_e" + std::to_string(next_entity++); };

    const int n_paths = rng.uniform_int(1, opt.max_paths);
    for (int k = 0; k < n_paths; ++k) {
      const bool planted = k == 0 || rng.chance(opt.extra_plant_prob);
      std::vector<detail::SentenceSpec> docs[2];
      for (int d = 0; d < 2; ++d) {
        const auto& target_id = d == 0 ? bag.head : bag.tail;
        const auto& target_name = d == 0 ? head_name : tail_name;
        docs[d].push_back(detail::sentence_with(rng, vocab_size, opt, {{target_id, target_name}}));
        // Slot entity: carries the relation pattern in planted paths of non-NA bags.
        const std::string cue = (!na && planted) ? pattern_token(relation) : detail::word(rng, vocab_size);
        docs[d].push_back(detail::sentence_with(rng, vocab_size, opt, {{fresh_entity(), {cue, detail::word(rng, vocab_size)}}}));
        const int noise = rng.uniform_int(0, opt.max_noise_entities);
        for (int n = 0; n < noise; ++n) {
          docs[d].push_back(detail::sentence_with(rng, vocab_size, opt, {{fresh_entity(), {detail::word(rng, vocab_size)}}}));
        }
        if (rng.chance(opt.filler_prob)) docs[d].push_back(detail::sentence_with(rng, vocab_size, opt, {}));
      }
      if (rng.chance(opt.bridge_prob)) {
        const std::string bridge = fresh_entity();
        const std::vector<std::string> name{detail::word(rng, vocab_size)};
        for (auto& doc : docs) doc.push_back(detail::sentence_with(rng, vocab_size, opt, {{bridge, name}}));
      }
      TextPath path;
      path.head_doc = detail::assemble(std::move(docs[0]), rng);
      path.tail_doc = detail::assemble(std::move(docs[1]), rng);
      bag.paths.push_back(std::move(path));
    }
    ds.bags.push_back(std::move(bag));
  }
  return ds;
}

}  // namespace xdre::data

#endif  // XDRE_DATA_SYNTH_HPP_
