#include <gtest/gtest.h>

#include "lpgen/estimation.hpp"
#include "lpgen/pipeline.hpp"
#include "lpgen/treebank.hpp"
#include "support.hpp"

using namespace lpgen;

namespace {

const LatentGrammar& small_grammar() {
  static const LatentGrammar g = [] {
    auto trees = read_treebank(testing_support::data_path("treebank/train.trees"));
    trees.resize(200);
    return train_grammar(trees, 4, 1);
  }();
  return g;
}

std::vector<Tokens> heldout(std::size_t n) {
  std::vector<Tokens> out;
  for (const auto& line : read_lines(testing_support::data_path("treebank/heldout.txt"))) {
    auto t = split_ws(line);
    if (!t.empty()) out.push_back(t);
    if (out.size() == n) break;
  }
  return out;
}

}  // namespace

TEST(Config, ParsesKeyValueLines) {
  auto kv = parse_config("# comment\n seed = 7 \nmode=naive\n\nbeam = 50\n");
  EXPECT_EQ(kv.size(), 3u);
  auto c = make_config(kv);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.mode, "naive");
  EXPECT_EQ(c.beam, 50u);
  EXPECT_EQ(c.m1, 24);
  EXPECT_EQ(c.m2, 1000);
  EXPECT_FALSE(c.threshold);
  EXPECT_THROW(parse_config("seed 7\n"), Error);
  EXPECT_THROW(parse_config("= 7\n"), Error);
}

TEST(Config, FlagsOverrideFileEntries) {
  auto kv = parse_config("seed = 7\nm1 = 8\n");
  kv["seed"] = "9";  // as the driver merges flag values
  auto c = make_config(kv);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.m1, 8);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  for (const auto& [k, v] : std::vector<std::pair<std::string, std::string>>{{"sede", "1"},
                                                                          {"m1", "0"},
                                                                          {"beam", "-3"},
                                                                          {"seed", "-1"},
                                                                          {"threshold", "1.5"},
                                                                          {"mode", "fancy"},
                                                                          {"paraphrases", "yes"}}) {
    try {
      make_config({{k, v}});
      ADD_FAILURE() << k;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::MalformedInput) << k;
    }
  }
}

TEST(Config, RequireInputs) {
  std::string empty, missing = "/nonexistent/file";
  try {
    require_inputs({{"kb", &empty}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MalformedInput);
  }
  try {
    require_inputs({{"kb", &missing}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Io);
  }
}

TEST(Paraphrase, NeverEmitsTheInput) {
  auto db = load_rule_db(testing_support::data_path("rules/rules200.tsv"));
  ParaphraseResources res;
  res.grammar = &small_grammar();
  res.rules = &db;
  ParaphraseSummary summary;
  std::size_t qid = 0;
  for (const auto& q : heldout(20)) {
    for (const auto& mode : {"naive", "rules"}) {
      for (const auto& row : paraphrase_question(qid, q, mode, res, 10, 3, &summary)) {
        EXPECT_NE(row.text, detokenize(lower_all(q)));
        EXPECT_EQ(row.qid, qid);
      }
    }
    ++qid;
  }
  EXPECT_EQ(summary.questions, 40u);
  EXPECT_GT(summary.with_candidates, 0u);
}

TEST(Paraphrase, DeterministicPerSeed) {
  auto db = load_rule_db(testing_support::data_path("rules/rules200.tsv"));
  ParaphraseResources res;
  res.grammar = &small_grammar();
  res.rules = &db;
  std::string a, b;
  std::size_t qid = 0;
  for (const auto& q : heldout(10)) {
    a += format_rows(paraphrase_question(qid, q, "rules", res, 10, 5));
    b += format_rows(paraphrase_question(qid, q, "rules", res, 10, 5));
    ++qid;
  }
  EXPECT_EQ(a, b);
}

TEST(Paraphrase, ModeNeedsItsResource) {
  ParaphraseResources res;
  res.grammar = &small_grammar();
  EXPECT_THROW(build_lattice("rules", {"what"}, res), Error);
  EXPECT_THROW(build_lattice("bilayered", {"what"}, res), Error);
  EXPECT_EQ(build_lattice("naive", {"what"}, res), build_naive({"what"}));
  EXPECT_THROW(paraphrase_question(0, {"what"}, "naive", ParaphraseResources{}, 1, 1), Error);
}

TEST(Paraphrase, ClassifierFiltersRows) {
  auto db = load_rule_db(testing_support::data_path("rules/rules200.tsv"));
  auto model = train_classifier(read_labeled_pairs(testing_support::data_path("classifier/train.tsv")), 1);
  ParaphraseResources res;
  res.grammar = &small_grammar();
  res.rules = &db;
  res.classifier = &model;
  std::size_t qid = 0;
  for (const auto& q : heldout(10))
    for (const auto& row : paraphrase_question(qid++, q, "rules", res, 10, 1)) EXPECT_GE(row.score, model.threshold);
}
