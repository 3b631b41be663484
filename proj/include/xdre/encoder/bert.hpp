#ifndef XDRE_ENCODER_BERT_HPP_
#define XDRE_ENCODER_BERT_HPP_

// Pretrained BERT encoder read from a Hugging Face style directory
// (config.json, vocab.txt, model.safetensors). Each path token becomes one
// or more subwords; its context vector is the componentwise max over them.

#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xdre/ad/attention.hpp"
#include "xdre/encoder/backend.hpp"
#include "xdre/encoder/safetensors.hpp"
#include "xdre/encoder/wordpiece.hpp"

namespace xdre::encoder {

struct BertShape {
  int hidden = 768;
  int layers = 12;
  int heads = 12;
  int intermediate = 3072;
  int max_positions = 512;
  int type_vocab = 2;
  int vocab = 0;
  double ln_eps = 1e-12;
};

inline constexpr const char* kBertPrefix = "encoder.bert.";

template <class S>
class BertEncoder final : public EncoderBackend<S> {
 public:
  /// Reads config and vocabulary; weights are loaded by init_params.
  explicit BertEncoder(std::filesystem::path dir, bool lowercase = true) : dir_(std::move(dir)) {
    std::ifstream in(dir_ / "config.json");
    if (!in) throw std::runtime_error("pretrained encoder directory '" + dir_.string() + "' has no config.json");
    const auto cfg = nlohmann::json::parse(in);
    if (cfg.contains("model_type") && cfg.at("model_type") != "bert") throw std::runtime_error("encoder checkpoint is not a BERT model");
    if (cfg.value("hidden_act", std::string("gelu")) != "gelu") throw std::runtime_error("only the erf GELU activation is supported");
    shape_.hidden = cfg.at("hidden_size").get<int>();
    shape_.layers = cfg.at("num_hidden_layers").get<int>();
    shape_.heads = cfg.at("num_attention_heads").get<int>();
    shape_.intermediate = cfg.at("intermediate_size").get<int>();
    shape_.max_positions = cfg.value("max_position_embeddings", 512);
    shape_.type_vocab = cfg.value("type_vocab_size", 2);
    shape_.vocab = cfg.value("vocab_size", 0);
    shape_.ln_eps = cfg.value("layer_norm_eps", 1e-12);
    if (std::filesystem::exists(dir_ / "tokenizer_config.json")) {
      std::ifstream tc(dir_ / "tokenizer_config.json");
      lowercase = nlohmann::json::parse(tc).value("do_lower_case", lowercase);
    }
    tokenizer_ = WordPiece::from_file(dir_ / "vocab.txt", lowercase);
  }

  std::string kind() const override { return "bert"; }
  int hidden_dim() const override { return shape_.hidden; }
  std::size_t max_length() const override { return static_cast<std::size_t>(std::min(512, shape_.max_positions)); }
  const BertShape& shape() const { return shape_; }
  const WordPiece& tokenizer() const { return tokenizer_; }

  std::size_t input_length(const PathTokens& path) const override {
    std::size_t n = 2;
    for (const auto& t : path.tokens) n += t == kSeparator ? 1 : tokenizer_.encode_word(t).size();
    return n;
  }

  void init_params(ad::ParamSet<S>& params, std::mt19937_64&) const override {
    const auto tensors = load_safetensors(dir_ / "model.safetensors");
    for (const auto& [raw, t] : tensors) {
      std::string name = raw;
      if (name.rfind("bert.", 0) == 0) name = name.substr(5);
      if (name.rfind("embeddings.", 0) != 0 && name.rfind("encoder.", 0) != 0) continue;  // pooler, task heads
      if (name.size() > 6 && name.compare(name.size() - 6, 6, ".gamma") == 0) name.replace(name.size() - 6, 6, ".weight");
      if (name.size() > 5 && name.compare(name.size() - 5, 5, ".beta") == 0) name.replace(name.size() - 5, 5, ".bias");
      const Eigen::Index rows = t.shape.size() == 2 ? t.shape[0] : 1;
      const Eigen::Index cols = t.shape.size() == 2 ? t.shape[1] : t.shape.empty() ? 1 : t.shape[0];
      if (t.shape.size() > 2) throw std::runtime_error("unexpected tensor rank for '" + raw + "'");
      ad::Matrix<S> m(rows, cols);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(t.values[static_cast<std::size_t>(i)]);
      params.emplace(kBertPrefix + name, std::move(m));
    }
    for (const char* required : {"embeddings.word_embeddings.weight", "embeddings.position_embeddings.weight"}) {
      if (!params.contains(std::string(kBertPrefix) + required)) throw std::runtime_error(std::string("checkpoint lacks ") + required);
    }
  }

  /// Subword ids, token types and the subword range of every path token.
  struct Subwords {
    std::vector<Eigen::Index> ids;
    std::vector<Eigen::Index> types;
    std::vector<std::pair<Eigen::Index, Eigen::Index>> word_ranges;
  };

  Subwords subwords(const PathTokens& path) const {
    Subwords s;
    s.ids.push_back(tokenizer_.cls());
    for (std::size_t i = 0; i < path.tokens.size(); ++i) {
      const auto begin = static_cast<Eigen::Index>(s.ids.size());
      if (path.tokens[i] == kSeparator) {
        s.ids.push_back(tokenizer_.sep());
      } else {
        for (int id : tokenizer_.encode_word(path.tokens[i])) s.ids.push_back(id);
      }
      s.word_ranges.emplace_back(begin, static_cast<Eigen::Index>(s.ids.size()));
    }
    s.ids.push_back(tokenizer_.sep());
    // [CLS] + head + [SEP] form segment 0, the tail and the final [SEP] segment 1.
    s.types.assign(s.ids.size(), 0);
    if (shape_.type_vocab > 1) {
      const Eigen::Index tail_start =
          path.tail_offset < s.word_ranges.size() ? s.word_ranges[path.tail_offset].first : static_cast<Eigen::Index>(s.ids.size()) - 1;
      for (std::size_t i = static_cast<std::size_t>(tail_start); i < s.ids.size(); ++i) s.types[i] = 1;
    }
    return s;
  }

  /// Final hidden states of every subword, [CLS] and [SEP] included.
  ad::Var<S> subword_states(ad::Tape<S>& tape, const ad::ParamSet<S>& params, const Subwords& s) const {
    const std::string p = kBertPrefix;
    const auto len = static_cast<Eigen::Index>(s.ids.size());
    std::vector<Eigen::Index> positions(static_cast<std::size_t>(len));
    for (Eigen::Index i = 0; i < len; ++i) positions[static_cast<std::size_t>(i)] = i;
    ad::Var<S> x = ad::add(ad::gather_rows(params.var(tape, p + "embeddings.word_embeddings.weight"), s.ids),
                           ad::gather_rows(params.var(tape, p + "embeddings.position_embeddings.weight"), positions));
    if (params.contains(p + "embeddings.token_type_embeddings.weight")) {
      x = ad::add(x, ad::gather_rows(params.var(tape, p + "embeddings.token_type_embeddings.weight"), s.types));
    }
    const S eps = static_cast<S>(shape_.ln_eps);
    x = ad::layer_norm_rows(x, params.var(tape, p + "embeddings.LayerNorm.weight"), params.var(tape, p + "embeddings.LayerNorm.bias"), eps);
    for (int l = 0; l < shape_.layers; ++l) {
      const std::string q = p + "encoder.layer." + std::to_string(l) + ".";
      auto v = [&](const std::string& n) { return params.var(tape, q + n); };
      ad::AttentionWeightsVars<S> w{v("attention.self.query.weight"), v("attention.self.query.bias"),
                                    v("attention.self.key.weight"),   v("attention.self.key.bias"),
                                    v("attention.self.value.weight"), v("attention.self.value.bias"),
                                    v("attention.output.dense.weight"), v("attention.output.dense.bias")};
      ad::Var<S> att = ad::multi_head_self_attention(x, w, shape_.heads);
      x = ad::layer_norm_rows(ad::add(x, att), v("attention.output.LayerNorm.weight"), v("attention.output.LayerNorm.bias"), eps);
      ad::Var<S> b_in = v("intermediate.dense.bias");
      ad::Var<S> b_out = v("output.dense.bias");
      ad::Var<S> ff = ad::linear(ad::gelu(ad::linear(x, v("intermediate.dense.weight"), &b_in)), v("output.dense.weight"), &b_out);
      x = ad::layer_norm_rows(ad::add(x, ff), v("output.LayerNorm.weight"), v("output.LayerNorm.bias"), eps);
    }
    return x;
  }

  ad::Var<S> encode(ad::Tape<S>& tape, const ad::ParamSet<S>& params, const PathTokens& path) const override {
    const Subwords s = subwords(path);
    ad::Var<S> h = subword_states(tape, params, s);
    std::vector<Eigen::Index> single;
    bool all_single = true;
    for (const auto& [b, e] : s.word_ranges) {
      all_single = all_single && e - b == 1;
      single.push_back(b);
    }
    if (all_single) return ad::gather_rows(h, std::move(single));
    std::vector<ad::Var<S>> words;
    words.reserve(s.word_ranges.size());
    for (const auto& [b, e] : s.word_ranges) words.push_back(ad::max_rows(h, b, e));
    return ad::concat_rows(words);
  }

 private:
  std::filesystem::path dir_;
  BertShape shape_;
  WordPiece tokenizer_;
};

}  // namespace xdre::encoder

#endif  // XDRE_ENCODER_BERT_HPP_
