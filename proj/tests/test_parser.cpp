#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lpgen/estimation.hpp"
#include "lpgen/parser.hpp"
#include "support.hpp"

using namespace lpgen;

namespace {

// S -> A B with two ways to derive "x y": via A-0 (0.6 * 0.1) or A-1 (0.4 * 0.1).
LatentGrammar two_way() {
  LatentGrammar g;
  g.layers = {1, 2, 0};
  g.add_root("S", {0, 0}, 1.0);
  g.add_binary("S", {0, 0}, "A", {0, 0}, "B", {0, 0}, 0.6);
  g.add_binary("S", {0, 0}, "A", {1, 0}, "B", {0, 0}, 0.4);
  g.add_lexical("A", {0, 0}, "x", 0.1);
  g.add_lexical("A", {0, 0}, "z", 0.9);
  g.add_lexical("A", {1, 0}, "x", 0.1);
  g.add_lexical("A", {1, 0}, "z", 0.9);
  g.add_lexical("B", {0, 0}, "y", 1.0);
  g.finalize();
  return g;
}

std::vector<Tokens> all_strings(int max_len) {
  std::vector<Tokens> out;
  for (int len = 1; len <= max_len; ++len)
    for (int mask = 0; mask < (1 << len); ++mask) {
      Tokens t;
      for (int i = 0; i < len; ++i) t.push_back((mask >> i) & 1 ? "b" : "a");
      out.push_back(t);
    }
  return out;
}

}  // namespace

TEST(Cky, UniqueDerivation) {
  LatentGrammar g;
  g.layers = {1, 1, 0};
  g.add_root("S", {}, 1.0);
  g.add_binary("S", {}, "A", {}, "B", {}, 1.0);
  g.add_lexical("A", {}, "x", 1.0);
  g.add_lexical("B", {}, "y", 1.0);
  g.finalize();
  auto d = cky_viterbi({"x", "y"}, g);
  EXPECT_EQ(render(d, g), "(S-0 (A-0 x) (B-0 y))");
  EXPECT_DOUBLE_EQ(d.logp, 0.0);
}

TEST(Cky, PicksHigherScoringStates) {
  auto g = two_way();
  auto d = cky_viterbi({"x", "y"}, g);
  EXPECT_EQ(render(d, g), "(S-0 (A-0 x) (B-0 y))");
  EXPECT_NEAR(std::exp(d.logp), 0.06, 1e-12);
  EXPECT_NEAR(d.logp, rescore(d, g), 1e-12);
}

TEST(Cky, FailureAndUnknownWords) {
  auto g = two_way();
  auto code = [&](const Tokens& t, ParseOptions o = {}) {
    try {
      cky_viterbi(t, g, o);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::Io;
  };
  EXPECT_EQ(code({}), Errc::ParseFailure);
  EXPECT_EQ(code({"y", "x"}), Errc::ParseFailure);
  EXPECT_EQ(code({"q", "y"}), Errc::ParseFailure);
  auto d = cky_viterbi({"q", "y"}, g, ParseOptions{true, 1e-12});
  EXPECT_EQ(d.yield(), (Tokens{"q", "y"}));
  EXPECT_NEAR(d.logp, std::log(0.6) + std::log(1e-12), 1e-9);
}

TEST(Cky, TiesBreakTowardSmallerStates) {
  LatentGrammar g;
  g.layers = {1, 2, 0};
  g.add_root("S", {}, 1.0);
  g.add_binary("S", {}, "A", {1, 0}, "A", {0, 0}, 0.5);
  g.add_binary("S", {}, "A", {0, 0}, "A", {1, 0}, 0.5);
  g.add_lexical("A", {0, 0}, "x", 1.0);
  g.add_lexical("A", {1, 0}, "x", 1.0);
  g.finalize();
  EXPECT_EQ(render(cky_viterbi({"x", "x"}, g), g), "(S-0 (A-0 x) (A-1 x))");
}

TEST(Cky, TwoLayerFixtureParse) {
  auto g = load_grammar(testing_support::data_path("fixtures/figure2.lpcfg"));
  auto d = cky_viterbi({"what", "day", "is", "nochebuena"}, g);
  EXPECT_EQ(render(d, g),
            "(SBARQ-33-403 (WHNP-7-291 (WP-7-254 what) (NN-45-142 day)) "
            "(SQ-8-925 (AUX-22-300 is) (NN-41-854 nochebuena)))");
  EXPECT_NEAR(std::exp(d.logp), 0.25, 1e-12);

  auto w = cky_viterbi({"when", "is", "nochebuena"}, g);
  // Two derivations score 0.25; the smaller root state wins.
  EXPECT_EQ(render(w, g), "(SBARQ-30-403 (WRB-42-707 when) (SQ-8-709 (AUX-12-300 is) (NN-41-854 nochebuena)))");
}

// Chart parser against an exhaustive max over derivations on random
// grammars, for every string over {a, b} up to length 6.
TEST(CkyProperties, MatchesBruteForceOnRandomGrammars) {
  std::mt19937_64 rng(2015);
  auto strings = all_strings(6);
  for (int trial = 0; trial < 100; ++trial) {
    auto g = testing_support::random_grammar(rng, 1 + trial % 2);
    for (const auto& s : strings) {
      double expect = testing_support::brute_force_max(g, s);
      if (std::isinf(expect)) {
        EXPECT_THROW(cky_viterbi(s, g), Error);
        continue;
      }
      auto d = cky_viterbi(s, g);
      ASSERT_NEAR(d.logp, expect, 1e-12) << "trial " << trial << " " << join(s);
      ASSERT_EQ(d.yield(), s);
      ASSERT_NEAR(rescore(d, g), d.logp, 1e-12);
    }
  }
}

TEST(CkyProperties, TrainedGrammarParsesItsTrainingYields) {
  auto trees = read_treebank(testing_support::data_path("treebank/train.trees"));
  auto g = train_grammar(trees, 8, 1);
  for (std::size_t i = 0; i < trees.size(); i += 10) {
    auto d = cky_viterbi(yield(trees[i]), g);
    EXPECT_EQ(d.yield(), yield(trees[i]));
    EXPECT_NEAR(rescore(d, g), d.logp, 1e-9);
    EXPECT_EQ(render(cky_viterbi(yield(trees[i]), g), g), render(d, g));
  }
}
