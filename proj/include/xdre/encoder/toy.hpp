#ifndef XDRE_ENCODER_TOY_HPP_
#define XDRE_ENCODER_TOY_HPP_

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "xdre/ad/ops.hpp"
#include "xdre/data/types.hpp"
#include "xdre/encoder/backend.hpp"

namespace xdre::encoder {

/// Token -> id table. Id 0 is reserved for unknown tokens.
class Vocabulary {
 public:
  static constexpr int kUnknown = 0;

  Vocabulary() : tokens_{"[UNK]"} { index_.emplace("[UNK]", 0); }

  explicit Vocabulary(const std::vector<std::string>& tokens) : Vocabulary() {
    for (const auto& t : tokens) add(t);
  }

  int add(const std::string& token) {
    auto [it, inserted] = index_.emplace(token, static_cast<int>(tokens_.size()));
    if (inserted) tokens_.push_back(token);
    return it->second;
  }

  int id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnknown : it->second;
  }

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// Sorted token inventory of the given datasets plus separator and marker.
  static Vocabulary from_datasets(const std::vector<const data::Dataset*>& datasets) {
    std::set<std::string> seen{kSeparator, "*"};
    for (const auto* ds : datasets) {
      for (const auto& bag : ds->bags) {
        for (const auto& p : bag.paths) {
          for (const auto* doc : {&p.head_doc, &p.tail_doc}) {
            for (const auto& s : doc->sentences) seen.insert(s.begin(), s.end());
          }
        }
      }
    }
    Vocabulary v;
    for (const auto& t : seen) v.add(t);
    return v;
  }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> index_;
};

/// Trainable stand-in for a pretrained encoder: token embeddings plus one
/// bidirectional tanh recurrence. Output row t is
/// embedding_t + forward_t + backward_t. With `sentence_scope` the recurrence
/// restarts at every sentence boundary.
template <class S>
class ToyEncoder final : public EncoderBackend<S> {
 public:
  ToyEncoder(Vocabulary vocab, int hidden_dim, bool sentence_scope = true, std::size_t max_length = 4096)
      : vocab_(std::move(vocab)), dim_(hidden_dim), sentence_scope_(sentence_scope), max_length_(max_length) {}

  std::string kind() const override { return "toy"; }
  int hidden_dim() const override { return dim_; }
  std::size_t max_length() const override { return max_length_; }
  const Vocabulary& vocabulary() const { return vocab_; }
  bool sentence_scope() const { return sentence_scope_; }

  void init_params(ad::ParamSet<S>& params, std::mt19937_64& rng) const override {
    params.add_uniform("encoder.embedding", vocab_.size(), dim_, 0.5, rng);
    for (const char* dir : {"fwd", "bwd"}) {
      const std::string p = std::string("encoder.") + dir;
      params.add_glorot(p + ".weight", dim_, dim_, rng);
      params.add_constant(p + ".bias", 1, dim_, S(0));
      params.add_uniform(p + ".recurrent", dim_, dim_, 0.5 / std::sqrt(static_cast<double>(dim_)), rng);
    }
  }

  ad::Var<S> encode(ad::Tape<S>& tape, const ad::ParamSet<S>& params, const PathTokens& path) const override {
    std::vector<Eigen::Index> ids;
    ids.reserve(path.tokens.size());
    for (const auto& t : path.tokens) ids.push_back(vocab_.id(t));
    ad::Var<S> emb = ad::gather_rows(params.var(tape, "encoder.embedding"), std::move(ids));

    std::vector<std::pair<Eigen::Index, Eigen::Index>> segments;
    if (sentence_scope_) {
      segments = path.sentences;
    } else {
      segments.emplace_back(0, static_cast<Eigen::Index>(path.tokens.size()));
    }
    ad::Var<S> out = emb;
    for (const char* dir : {"fwd", "bwd"}) {
      const std::string p = std::string("encoder.") + dir;
      ad::Var<S> bias = params.var(tape, p + ".bias");
      ad::Var<S> pre = ad::linear(emb, params.var(tape, p + ".weight"), &bias);
      ad::Var<S> h = ad::tanh_recurrence(pre, params.var(tape, p + ".recurrent"), segments, std::string(dir) == "bwd");
      out = ad::add(out, h);
    }
    return out;
  }

 private:
  Vocabulary vocab_;
  int dim_;
  bool sentence_scope_;
  std::size_t max_length_;
};

}  // namespace xdre::encoder

#endif  // XDRE_ENCODER_TOY_HPP_
