#include <gtest/gtest.h>

#include <random>

#include "lpgen/estimation.hpp"
#include "lpgen/grammar.hpp"
#include "support.hpp"

using namespace lpgen;

namespace {

LatentGrammar tiny(double second_lex = 0.5) {
  LatentGrammar g;
  g.layers = {1, 2, 0};
  g.add_root("S", {0, 0}, 1.0);
  g.add_binary("S", {0, 0}, "A", {0, 0}, "A", {1, 0}, 1.0);
  g.add_lexical("A", {0, 0}, "x", 0.5);
  g.add_lexical("A", {0, 0}, "y", second_lex);
  g.add_lexical("A", {1, 0}, "x", 1.0);
  g.finalize();
  return g;
}

}  // namespace

TEST(Validate, WellFormedGrammarHasNoViolations) {
  auto rep = validate(tiny());
  EXPECT_TRUE(rep.ok()) << format_report(tiny(), rep);
}

TEST(Validate, UnderNormalizedContextIsReportedOnce) {
  auto g = tiny(0.4);
  auto rep = validate(g);
  ASSERT_EQ(rep.violations.size(), 1u);
  EXPECT_EQ(rep.violations[0].kind, ViolationKind::Distribution);
  EXPECT_EQ(rep.violations[0].symbol, "A");
  EXPECT_EQ(rep.violations[0].state.syn, 0u);
}

TEST(Validate, RootMassAndDeficit) {
  LatentGrammar g;
  g.layers = {1, 2, 0};
  g.add_root("S", {0, 0}, 0.5);
  g.add_binary("S", {0, 0}, "A", {0, 0}, "A", {1, 0}, 1.0);
  g.add_lexical("A", {0, 0}, "x", 1.0);
  g.finalize();
  auto rep = validate(g);
  bool mass = false, deficit = false;
  for (const auto& v : rep.violations) {
    mass |= v.kind == ViolationKind::RootMass;
    deficit |= v.kind == ViolationKind::Deficit && v.symbol == "A" && v.state.syn == 1;
  }
  EXPECT_TRUE(mass);
  EXPECT_TRUE(deficit);
}

TEST(Validate, SymbolMisuseAndStateRange) {
  LatentGrammar g;
  g.layers = {1, 1, 0};
  g.add_root("S", {0, 0}, 1.0);
  g.add_binary("S", {0, 0}, "S", {0, 0}, "S", {3, 0}, 1.0);
  g.add_lexical("S", {0, 0}, "x", 1.0);
  g.finalize();
  auto rep = validate(g);
  bool misuse = false, range = false;
  for (const auto& v : rep.violations) {
    misuse |= v.kind == ViolationKind::SymbolMisuse;
    range |= v.kind == ViolationKind::StateRange;
  }
  EXPECT_TRUE(misuse);
  EXPECT_TRUE(range);
}

TEST(Validate, LargeLayerConfigIsNotedNotRejected) {
  LatentGrammar g = tiny();
  g.layers = {2, 24, 1000};
  auto rep = validate(g);
  ASSERT_FALSE(rep.notes.empty());
  EXPECT_NE(rep.notes[0].find("24,000 latent states"), std::string::npos);
  EXPECT_TRUE(rep.ok());
}

TEST(Serialize, RoundTripIsExact) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto g = testing_support::random_grammar(rng, 1 + trial % 3);
    auto text = serialize(g);
    auto back = deserialize(text);
    EXPECT_EQ(serialize(back), text);
    ASSERT_EQ(back.binary.size(), g.binary.size());
    // Every probability survives bit for bit.
    std::multiset<double> a, b;
    for (const auto& r : g.binary) a.insert(r.prob);
    for (const auto& r : back.binary) b.insert(r.prob);
    EXPECT_EQ(a, b);
  }
}

TEST(Serialize, TrainedGrammarRoundTrip) {
  auto trees = read_treebank(testing_support::data_path("treebank/train.trees"));
  auto g = train_grammar(trees, 24, 1);
  auto text = serialize(g);
  auto path = testing_support::temp_path("roundtrip.lpcfg");
  save_grammar(g, path);
  auto back = load_grammar(path);
  EXPECT_EQ(serialize(back), text);
  EXPECT_EQ(back.layers, g.layers);
  EXPECT_TRUE(validate(back).ok());
}

TEST(Serialize, CanonicalRegardlessOfInsertionOrder) {
  LatentGrammar a, b;
  a.layers = b.layers = {1, 1, 0};
  a.add_root("S", {}, 1.0);
  a.add_lexical("S", {}, "x", 0.25);
  a.add_lexical("S", {}, "y", 0.75);
  b.add_lexical("S", {}, "y", 0.75);
  b.add_lexical("S", {}, "x", 0.25);
  b.add_root("S", {}, 1.0);
  a.finalize();
  b.finalize();
  EXPECT_EQ(serialize(a), serialize(b));
}

TEST(Serialize, TwoLayerFixture) {
  auto g = load_grammar(testing_support::data_path("fixtures/figure2.lpcfg"));
  EXPECT_EQ(g.layers, (LayerConfig{2, 46, 1000}));
  EXPECT_TRUE(validate(g).ok()) << format_report(g, validate(g));
  EXPECT_EQ(serialize(deserialize(serialize(g))), serialize(g));
}

TEST(Serialize, MalformedInputs) {
  auto code = [](const char* text) {
    try {
      deserialize(text);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::Io;
  };
  EXPECT_EQ(code(""), Errc::MalformedGrammarFile);
  EXPECT_EQ(code("LPCFG v1 layers=1 m1=1 m2=0\n"), Errc::MalformedGrammarFile);
  EXPECT_EQ(code("PCFG v1 layers=1 m1=1 m2=0\nROOT\tS\t0\t1\n"), Errc::MalformedGrammarFile);
  EXPECT_EQ(code("LPCFG v1 layers=3 m1=1 m2=0\nROOT\tS\t0\t1\n"), Errc::MalformedGrammarFile);
  EXPECT_EQ(code("LPCFG v1 layers=1 m1=1 m2=0\nROOT\tS\t0:1\t1\n"), Errc::MalformedGrammarFile);
  EXPECT_EQ(code("LPCFG v1 layers=1 m1=1 m2=0\nROOT\tS\t0\tabc\n"), Errc::MalformedGrammarFile);
  EXPECT_EQ(code("LPCFG v1 layers=1 m1=1 m2=0\nROOT\tS\t0\t1\nFOO\tx\n"), Errc::MalformedGrammarFile);
  EXPECT_EQ(code("LPCFG v1 layers=1 m1=1 m2=0\nROOT\tS\t0\t1\nLEX\tS\t0\tx\n"), Errc::MalformedGrammarFile);
}
