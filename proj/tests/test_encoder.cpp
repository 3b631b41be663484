#include <gtest/gtest.h>

#include <fstream>

#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "oracles.hpp"

namespace {

using namespace xdre;
using M = ad::Matrix<double>;

const std::filesystem::path kData = XDRE_TEST_DATA;

TEST(Pooling, MentionIsSpanMaxEntityIsLogSumExp) {
  std::mt19937_64 rng(1);
  const M tokens = testutil::random_matrix<double>(6, 4, rng);
  const M m = encoder::mention_repr(tokens, {1, 4});
  for (Eigen::Index c = 0; c < 4; ++c) EXPECT_EQ(m(0, c), tokens.block(1, c, 3, 1).maxCoeff());
  EXPECT_THROW(encoder::mention_repr(tokens, {2, 2}), std::invalid_argument);
  EXPECT_THROW(encoder::mention_repr(tokens, {5, 7}), std::out_of_range);

  const M a = testutil::random_matrix<double>(1, 4, rng), b = testutil::random_matrix<double>(1, 4, rng);
  const M e = encoder::entity_path_repr<double>({a, b});
  EXPECT_LT(oracle::max_abs_diff(oracle::row_of(e), oracle::logsumexp({oracle::row_of(a), oracle::row_of(b)})), 1e-14);
  EXPECT_EQ(encoder::entity_path_repr<double>({a}), a);
}

TEST(FlattenPath, SeparatorAndFlatSpans) {
  const auto bag = testutil::figure1_bag();
  const auto p = encoder::flatten_path(bag.paths[0]);
  const auto head_len = bag.paths[0].head_doc.token_count();
  EXPECT_EQ(p.tokens.size(), head_len + 1 + bag.paths[0].tail_doc.token_count());
  EXPECT_EQ(p.tokens[head_len], encoder::kSeparator);
  EXPECT_EQ(p.tail_offset, head_len + 1);
  ASSERT_EQ(p.mentions.at("Russian").size(), 2u);
  const auto tail_russian = p.mentions.at("Russian")[1];
  EXPECT_EQ(p.tokens[static_cast<std::size_t>(tail_russian.start)], "Russian");
  EXPECT_EQ(p.mention_docs.at("Russian"), (std::vector<int>{0, 1}));
  EXPECT_EQ(p.sentences.size(), 5u);
}

TEST(ToyEncoder, RecurrenceRestartsAtSentenceBoundaries) {
  const auto bag = testutil::figure1_bag();
  auto ds = testutil::single_bag_dataset(bag);
  const auto vocab = encoder::Vocabulary::from_datasets({&ds});
  EXPECT_EQ(vocab.id("no-such-token"), 0);
  encoder::ToyEncoder<double> scoped(vocab, 5, true), global(vocab, 5, false);
  ad::ParamSet<double> params;
  std::mt19937_64 rng(2);
  scoped.init_params(params, rng);
  auto path = encoder::flatten_path(bag.paths[0]);
  ad::Tape<double> tape(false);
  const M base = scoped.encode(tape, params, path).value();
  EXPECT_EQ(base.rows(), static_cast<Eigen::Index>(path.tokens.size()));
  EXPECT_EQ(base.cols(), 5);

  // Changing the last token only affects its own sentence under sentence scope.
  auto changed = path;
  changed.tokens.back() = "Soviet";
  const M after = scoped.encode(tape, params, changed).value();
  const auto last_sentence_begin = path.sentences.back().first;
  EXPECT_EQ(after.topRows(last_sentence_begin), base.topRows(last_sentence_begin));
  EXPECT_NE(after.row(last_sentence_begin), base.row(last_sentence_begin));
  const M g0 = global.encode(tape, params, path).value(), g1 = global.encode(tape, params, changed).value();
  EXPECT_NE(g0.row(0), g1.row(0));
}

TEST(ToyEncoder, LengthLimitIsEnforced) {
  auto ds = testutil::single_bag_dataset(testutil::figure1_bag());
  encoder::ToyEncoder<double> enc(encoder::Vocabulary::from_datasets({&ds}), 4, true, 8);
  ad::ParamSet<double> params;
  std::mt19937_64 rng(2);
  enc.init_params(params, rng);
  ad::Tape<double> tape(false);
  EXPECT_THROW(encoder::encode_path<double>(tape, params, enc, encoder::flatten_path(ds.bags[0].paths[0])), encoder::EncoderLengthError);
}

TEST(WordPiece, GreedyLongestMatch) {
  const auto wp = encoder::WordPiece::from_file(kData / "tiny_bert" / "vocab.txt", true);
  auto pieces = [&](const std::string& w) {
    std::vector<std::string> out;
    for (int id : wp.encode_word(w)) out.push_back(wp.token(id));
    return out;
  };
  EXPECT_EQ(pieces("Broadcasting"), (std::vector<std::string>{"broad", "##cast", "##ing"}));
  EXPECT_EQ(pieces("w12"), (std::vector<std::string>{"w", "##1", "##2"}));
  EXPECT_EQ(pieces("station,"), (std::vector<std::string>{"station", ","}));
  EXPECT_EQ(pieces("zebra"), (std::vector<std::string>{"[UNK]"}));
  EXPECT_EQ(pieces("[SEP]"), (std::vector<std::string>{"[SEP]"}));
  const encoder::WordPiece cased(std::vector<std::string>{"[PAD]", "[UNK]", "[CLS]", "[SEP]", "radio"}, false);
  EXPECT_EQ(cased.token(cased.encode_word("Radio").front()), "[UNK]");
}

TEST(Safetensors, LoadsFixtureShapes) {
  const auto t = encoder::load_safetensors(kData / "tiny_bert" / "model.safetensors");
  bool found = false;
  for (const auto& [name, tensor] : t) {
    if (name.find("word_embeddings.weight") == std::string::npos) continue;
    found = true;
    EXPECT_EQ(tensor.shape, (std::vector<std::int64_t>{32, 16}));
    EXPECT_EQ(tensor.values.size(), 32u * 16u);
  }
  EXPECT_TRUE(found);
  EXPECT_EQ(encoder::half_to_float(0x3c00), 1.0f);
  EXPECT_EQ(encoder::half_to_float(0xc000), -2.0f);
  EXPECT_EQ(encoder::half_to_float(0x0001), std::ldexp(1.0f, -24));
  const auto dir = testutil::temp_dir("safetensors_bad");
  std::ofstream(dir / "bad.safetensors") << "xx";
  EXPECT_THROW(encoder::load_safetensors(dir / "bad.safetensors"), std::runtime_error);
}

TEST(BertEncoder, MatchesReferenceImplementation) {
  const auto ref = nlohmann::json::parse(data::read_file(kData / "tiny_bert" / "reference.json"));
  const auto words = ref.at("words").get<std::vector<std::string>>();
  const auto sep = std::find(words.begin(), words.end(), std::string("[SEP]"));
  data::TextPath path;
  path.head_doc.sentences = {std::vector<std::string>(words.begin(), sep)};
  path.tail_doc.sentences = {std::vector<std::string>(sep + 1, words.end())};
  const auto flat = encoder::flatten_path(path);
  ASSERT_EQ(flat.tokens, words);

  encoder::BertEncoder<double> bert(kData / "tiny_bert");
  EXPECT_EQ(bert.hidden_dim(), 16);
  ad::ParamSet<double> params;
  std::mt19937_64 rng(0);
  bert.init_params(params, rng);
  const auto sw = bert.subwords(flat);
  EXPECT_EQ(std::vector<Eigen::Index>(sw.ids.begin(), sw.ids.end()), ref.at("ids").get<std::vector<Eigen::Index>>());
  EXPECT_EQ(std::vector<Eigen::Index>(sw.types.begin(), sw.types.end()), ref.at("types").get<std::vector<Eigen::Index>>());

  ad::Tape<double> tape(false);
  const M h = bert.subword_states(tape, params, sw).value();
  const auto want = ref.at("hidden").get<std::vector<std::vector<double>>>();
  ASSERT_EQ(h.rows(), static_cast<Eigen::Index>(want.size()));
  double worst = 0;
  for (Eigen::Index r = 0; r < h.rows(); ++r)
    for (Eigen::Index c = 0; c < h.cols(); ++c) worst = std::max(worst, std::abs(h(r, c) - want[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]));
  EXPECT_LT(worst, 1e-5);

  // Word vectors are the max over each word's subword states.
  const M words_out = bert.encode(tape, params, flat).value();
  ASSERT_EQ(words_out.rows(), static_cast<Eigen::Index>(words.size()));
  const auto [b, e] = sw.word_ranges[10];  // "broadcasting"
  EXPECT_EQ(e - b, 3);
  EXPECT_EQ(words_out.row(10), h.middleRows(b, e - b).colwise().maxCoeff());
}

TEST(BertEncoder, MissingCheckpointFailsClearly) {
  EXPECT_THROW(encoder::BertEncoder<double>(kData / "no_such_model"), std::runtime_error);
}

}  // namespace
