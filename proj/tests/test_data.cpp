#include <gtest/gtest.h>

#include <fstream>

#include "helpers.hpp"

namespace {

using namespace xdre;
using namespace xdre::data;

const std::filesystem::path kData = XDRE_TEST_DATA;

TEST(LabelSpace, RequiresNaFirstAndUniqueNames) {
  EXPECT_NO_THROW(LabelSpace({"NA", "r"}));
  EXPECT_THROW(LabelSpace({"r", "NA"}), std::invalid_argument);
  EXPECT_THROW(LabelSpace({"NA"}), std::invalid_argument);
  EXPECT_THROW(LabelSpace({"NA", "r", "r"}), std::invalid_argument);
  const auto s = LabelSpace::synthetic(2);
  EXPECT_EQ(s.size(), 3);
  EXPECT_EQ(s.index_of("rel_2"), 2);
  EXPECT_EQ(s.name(0), "NA");
}

TEST(Dataset, JsonRoundTrip) {
  const auto ds = synth_generate(3, 20, 0.5, LabelSpace::synthetic(3), 40);
  const auto back = parse_bags(dump_bags(ds));
  EXPECT_TRUE(back.rejected.empty());
  EXPECT_EQ(back.dataset.label_space, ds.label_space);
  EXPECT_EQ(back.dataset.bags, ds.bags);
  const auto dir = testutil::temp_dir("roundtrip");
  save_bags(ds, dir / "d.json");
  EXPECT_EQ(load_dataset(dir / "d.json").bags, ds.bags);
}

TEST(Dataset, RejectsBrokenBagsIndividually) {
  auto ds = synth_generate(3, 4, 0.5, LabelSpace::synthetic(2), 40);
  auto j = to_json(ds);
  j["bags"][1]["labels"] = {7};
  j["bags"][2]["paths"][0]["head_doc"]["mentions"][0]["end"] = 999;
  j["bags"][3].erase("head");
  const auto r = parse_bags(j.dump());
  EXPECT_EQ(r.dataset.bags.size(), 1u);
  ASSERT_EQ(r.rejected.size(), 3u);
  EXPECT_NE(r.report().find("outside label space"), std::string::npos);
  EXPECT_NE(r.report().find("out of range"), std::string::npos);
  EXPECT_THROW(parse_bags("{not json"), DatasetError);
  EXPECT_THROW(parse_bags(R"({"bags": []})"), DatasetError);
}

TEST(Dataset, ValidateFlagsStructuralProblems) {
  auto bag = testutil::two_path_bag(true);
  const auto labels = LabelSpace::synthetic(2);
  EXPECT_TRUE(validate_bag(bag, labels).empty());
  bag.labels = {0, 1};
  EXPECT_FALSE(validate_bag(bag, labels).empty());
  bag = testutil::two_path_bag(true);
  bag.tail = bag.head;
  EXPECT_FALSE(validate_bag(bag, labels).empty());
  bag = testutil::two_path_bag(true);
  bag.paths[1].tail_doc.mentions.clear();
  EXPECT_FALSE(validate_bag(bag, labels).empty());
}

TEST(Synth, DeterministicPerSeed) {
  const auto labels = LabelSpace::synthetic(4);
  const auto a = synth_generate(21, 30, 0.5, labels, 50);
  EXPECT_EQ(a, synth_generate(21, 30, 0.5, labels, 50));
  EXPECT_NE(a.bags, synth_generate(22, 30, 0.5, labels, 50).bags);
  EXPECT_EQ(a.bags.size(), 30u);
  EXPECT_GT(a.na_count(), 5u);
  EXPECT_LT(a.na_count(), 25u);
  for (const auto& b : a.bags) EXPECT_TRUE(validate_bag(b, labels).empty()) << b.id;
}

TEST(Markers, WrapEveryMentionAndAreIdempotent) {
  const auto bag = testutil::figure1_bag();
  const auto marked = insert_markers(bag);
  const auto& doc = marked.paths[0].head_doc;
  for (const auto& m : doc.mentions) {
    const auto& s = doc.sentences[static_cast<std::size_t>(m.sent)];
    EXPECT_EQ(s[static_cast<std::size_t>(m.start - 1)], kMarker);
    EXPECT_EQ(s[static_cast<std::size_t>(m.end)], kMarker);
  }
  EXPECT_EQ(insert_markers(marked), marked);
  for (std::size_t s = 0; s < doc.sentences.size(); ++s) EXPECT_EQ(strip_markers(doc.sentences[s]), bag.paths[0].head_doc.sentences[s]);
  // The second sentence holds exactly one mention.
  EXPECT_EQ(doc.sentences[1].size(), bag.paths[0].head_doc.sentences[1].size() + 2);
}

TEST(Markers, OverlappingSpansNest) {
  Document d = testutil::make_doc({"a b c d"}, {{"x", 0, 0, 3}, {"y", 0, 0, 1}, {"z", 0, 2, 3}});
  const auto m = insert_markers(d);
  EXPECT_EQ(m.sentences[0], (std::vector<std::string>{"*", "*", "a", "*", "b", "*", "c", "*", "*", "d"}));
  EXPECT_EQ(m.mentions[0].start, 1);
  EXPECT_EQ(m.mentions[0].end, 8);
}

TEST(ContextFilter, KeepsTargetsWithinBudget) {
  DocumentBag bag;
  bag.id = "long";
  bag.head = "h";
  bag.tail = "t";
  bag.labels = {1};
  bag.paths.push_back({testutil::make_doc({"w w w w w w", "h w w", "w x w y w", "w w w w"}, {{"h", 1, 0, 1}, {"x", 2, 1, 2}, {"y", 2, 3, 4}}),
                       testutil::make_doc({"t w w w", "w w w w w w w"}, {{"t", 0, 0, 1}})});
  const auto f = filter_context(bag, 12);
  const auto& p = f.paths[0];
  EXPECT_LE(p.head_doc.token_count() + p.tail_doc.token_count(), 12u);
  EXPECT_TRUE(p.head_doc.mentions_entity("h"));
  EXPECT_TRUE(p.tail_doc.mentions_entity("t"));
  EXPECT_TRUE(p.head_doc.mentions_entity("x"));  // the two-entity sentence ranks first
  EXPECT_TRUE(validate_bag(f, LabelSpace::synthetic(1)).empty());
  EXPECT_EQ(filter_context(bag, 1000), bag);
}

TEST(ContextFilter, TruncatesOversizedTargetSentences) {
  DocumentBag bag;
  bag.id = "huge";
  bag.head = "h";
  bag.tail = "t";
  bag.labels = {1};
  bag.paths.push_back({testutil::make_doc({"a b c d e f g h i j h k"}, {{"h", 0, 10, 11}}),
                       testutil::make_doc({"t a b c d e f g"}, {{"t", 0, 0, 1}})});
  std::vector<std::string> warnings;
  const auto f = filter_context(bag, 8, &warnings);
  const auto& p = f.paths[0];
  EXPECT_EQ(p.head_doc.token_count() + p.tail_doc.token_count(), 8u);
  EXPECT_TRUE(p.head_doc.mentions_entity("h"));
  EXPECT_TRUE(p.tail_doc.mentions_entity("t"));
  EXPECT_EQ(warnings.size(), 1u);
  EXPECT_TRUE(validate_bag(f, LabelSpace::synthetic(1)).empty());
  EXPECT_THROW(filter_context(bag, 1), std::invalid_argument);
}

TEST(Codred, ConvertsMiniSample) {
  const auto dir = kData / "codred_mini";
  const auto r = convert_codred(dir / "bags_train.jsonl", dir / "docs.jsonl");
  EXPECT_TRUE(r.skipped.empty());
  EXPECT_EQ(r.dataset.label_space, LabelSpace({"NA", "broadcast_in", "part_of"}));
  ASSERT_EQ(r.dataset.bags.size(), 24u);
  for (const auto& b : r.dataset.bags) EXPECT_TRUE(validate_bag(b, r.dataset.label_space).empty()) << b.id;
  EXPECT_EQ(r.dataset.bags[0].labels, std::vector<int>{1});
  EXPECT_EQ(r.dataset.bags[2].labels, std::vector<int>{0});
  EXPECT_EQ(r.dataset.bags[1].paths.size(), 2u);
  const auto& doc = r.dataset.bags[0].paths[0].head_doc;
  ASSERT_EQ(doc.sentences.size(), 2u);
  EXPECT_EQ(doc.mentions.size(), 2u);
  const auto dev = convert_codred(dir / "bags_dev.jsonl", dir / "docs.jsonl", r.dataset.label_space);
  EXPECT_EQ(dev.dataset.bags.size(), 12u);
}

TEST(Codred, AlternateSpellingsAndSkips) {
  const auto dir = testutil::temp_dir("codred_alt");
  std::ofstream(dir / "docs.json") << R"([{"id": "A", "tokens": [["x", "met", "y"], ["bye", "."]], "entities": [{"Q": "x", "mentions": [[0, 1]]}]},
                                          {"id": "B", "tokens": ["z", "is", "here", ".", "ok"], "sents": [[0, 4], [4, 5]], "entities": [{"id": "z", "spans": [[0, 1]]}]}])";
  std::ofstream(dir / "bags.json") << R"([{"head": "x", "tail": "z", "label": "rel", "doc_h": "A", "doc_t": "B"},
                                          {"h": "x", "t": "z", "relation": "NA", "doc_pairs": [{"h": "A", "t": "missing"}]},
                                          {"h": "x"}])";
  const auto r = convert_codred(dir / "bags.json", dir / "docs.json");
  ASSERT_EQ(r.dataset.bags.size(), 1u);
  EXPECT_EQ(r.skipped.size(), 2u);
  EXPECT_EQ(r.dataset.bags[0].id, "x|z");
  EXPECT_EQ(r.dataset.bags[0].paths[0].tail_doc.sentences.size(), 2u);
}

TEST(Prepare, MarkersThenFilter) {
  const auto bag = testutil::figure1_bag();
  const auto p = model::prepare_bag(bag, 512);
  EXPECT_EQ(p.paths[0].head_doc.token_count(), bag.paths[0].head_doc.token_count() + 6);
  EXPECT_EQ(model::prepare_bag(p, 512), p);
}

}  // namespace
