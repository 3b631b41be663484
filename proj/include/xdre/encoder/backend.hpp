#ifndef XDRE_ENCODER_BACKEND_HPP_
#define XDRE_ENCODER_BACKEND_HPP_

#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "xdre/ad/params.hpp"
#include "xdre/data/types.hpp"
#include "xdre/encoder/pooling.hpp"

namespace xdre::encoder {

inline const std::string kSeparator = "[SEP]";

/// A text path flattened to head tokens, one separator, then tail tokens.
struct PathTokens {
  std::vector<std::string> tokens;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> sentences;  // flat [begin, end)
  std::size_t tail_offset = 0;
  std::map<std::string, std::vector<Span>> mentions;              // entity -> flat spans, both documents
  std::map<std::string, std::vector<int>> mention_docs;           // entity -> doc index per span
};

inline PathTokens flatten_path(const data::TextPath& path) {
  PathTokens out;
  auto append_doc = [&](const data::Document& doc, int doc_index) {
    const std::size_t base = out.tokens.size();
    const auto offsets = doc.sentence_offsets();
    for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
      const auto begin = static_cast<Eigen::Index>(out.tokens.size());
      out.tokens.insert(out.tokens.end(), doc.sentences[s].begin(), doc.sentences[s].end());
      out.sentences.emplace_back(begin, static_cast<Eigen::Index>(out.tokens.size()));
    }
    for (const auto& m : doc.mentions) {
      const auto at = static_cast<int>(base + offsets[static_cast<std::size_t>(m.sent)]);
      out.mentions[m.entity].push_back(Span{at + m.start, at + m.end});
      out.mention_docs[m.entity].push_back(doc_index);
    }
  };
  append_doc(path.head_doc, 0);
  out.sentences.emplace_back(static_cast<Eigen::Index>(out.tokens.size()), static_cast<Eigen::Index>(out.tokens.size() + 1));
  out.tokens.push_back(kSeparator);
  out.tail_offset = out.tokens.size();
  append_doc(path.tail_doc, 1);
  return out;
}

class EncoderLengthError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Sequence encoder mapping L tokens to an L x hidden_dim matrix.
template <class S>
class EncoderBackend {
 public:
  virtual ~EncoderBackend() = default;

  virtual std::string kind() const = 0;
  virtual int hidden_dim() const = 0;
  /// Longest accepted input, counted in the backend's own units.
  virtual std::size_t max_length() const = 0;
  /// Input length in backend units (subwords for pretrained models).
  virtual std::size_t input_length(const PathTokens& path) const { return path.tokens.size(); }
  /// Adds freshly initialized parameters (no-op for loaded checkpoints).
  virtual void init_params(ad::ParamSet<S>& params, std::mt19937_64& rng) const = 0;
  virtual ad::Var<S> encode(ad::Tape<S>& tape, const ad::ParamSet<S>& params, const PathTokens& path) const = 0;
};

/// Per-token context vectors for head_doc ⧺ [SEP] ⧺ tail_doc.
template <class S>
ad::Var<S> encode_path(ad::Tape<S>& tape, const ad::ParamSet<S>& params, const EncoderBackend<S>& backend,
                       const PathTokens& path) {
  const std::size_t len = backend.input_length(path);
  if (len > backend.max_length()) {
    throw EncoderLengthError("encoder input of " + std::to_string(len) + " units exceeds the " + backend.kind() +
                             " backend limit of " + std::to_string(backend.max_length()) +
                             "; run filter_context with a smaller budget first");
  }
  ad::Var<S> out = backend.encode(tape, params, path);
  if (out.rows() != static_cast<Eigen::Index>(path.tokens.size()) || out.cols() != backend.hidden_dim()) {
    throw std::logic_error("encoder backend returned a matrix of the wrong shape");
  }
  return out;
}

}  // namespace xdre::encoder

#endif  // XDRE_ENCODER_BACKEND_HPP_
