#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <map>
#include <random>

#include "lpgen/estimation.hpp"
#include "lpgen/sampler.hpp"
#include "support.hpp"

using namespace lpgen;

namespace {

WordLattice lattice_of(int nodes, std::vector<std::tuple<int, int, std::string>> edges) {
  WordLattice w;
  w.num_nodes = nodes;
  for (const auto& [a, b, t] : edges) w.edges.push_back({a, b, t, Origin::Input, static_cast<int>(w.edges.size())});
  return w;
}

// Diamond with paths "a b" and "c d".
WordLattice diamond() { return lattice_of(4, {{0, 1, "a"}, {1, 3, "b"}, {0, 2, "c"}, {2, 3, "d"}}); }

// S -> X Y with X, Y free to pick either side of the diamond.
LatentGrammar crossing_grammar() {
  LatentGrammar g;
  g.layers = {1, 1, 0};
  g.add_root("S", {}, 1.0);
  g.add_binary("S", {}, "X", {}, "Y", {}, 1.0);
  g.add_lexical("X", {}, "a", 0.5);
  g.add_lexical("X", {}, "c", 0.5);
  g.add_lexical("Y", {}, "b", 0.5);
  g.add_lexical("Y", {}, "d", 0.5);
  g.finalize();
  return g;
}

// Emitted tokens are the tokens of the consumed edges, as multisets.
bool tokens_match_path(const WordLattice& w, const ParaphraseCandidate& c) {
  Tokens used;
  for (int id : c.consumed_path) used.push_back(w.find_edge(id)->token);
  Tokens toks = c.tokens;
  std::sort(used.begin(), used.end());
  std::sort(toks.begin(), toks.end());
  return used == toks;
}

}  // namespace

TEST(Prune, FullVocabularyKeepsEverything) {
  auto g = crossing_grammar();
  auto pg = prune_grammar(g, diamond());
  EXPECT_EQ(pg.alive_rule_count(), g.binary.size() + g.lexical.size());
  EXPECT_TRUE(check_pruned(pg, diamond()).empty());
}

TEST(Prune, ClosureDropsUnproductiveChain) {
  // S -> A B | A C ; C -> D D ; D -> z. Without "z", C and D and S -> A C go.
  LatentGrammar g;
  g.layers = {1, 1, 0};
  g.add_root("S", {}, 1.0);
  g.add_binary("S", {}, "A", {}, "B", {}, 0.5);
  g.add_binary("S", {}, "A", {}, "C", {}, 0.5);
  g.add_binary("C", {}, "D", {}, "D", {}, 1.0);
  g.add_lexical("A", {}, "x", 1.0);
  g.add_lexical("B", {}, "y", 1.0);
  g.add_lexical("D", {}, "z", 1.0);
  g.finalize();
  auto w = build_naive({"x", "y"});
  auto pg = prune_grammar(g, w);
  EXPECT_EQ(pg.alive_rule_count(), 3u);
  EXPECT_EQ(pg.context(g.symbols.find("C"), {}), -1);
  EXPECT_TRUE(check_pruned(pg, w).empty());
  auto full = prune_grammar(g, build_naive({"x", "y", "z"}));
  EXPECT_EQ(full.alive_rule_count(), 6u);
}

TEST(Prune, EmptyIntersection) {
  auto g = crossing_grammar();
  try {
    prune_grammar(g, build_naive({"q", "r"}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyIntersection);
  }
  // Words present but no complete derivation: X has words, Y does not.
  EXPECT_THROW(prune_grammar(g, build_naive({"a", "c"})), Error);
}

TEST(Sample, SingleDerivation) {
  LatentGrammar g;
  g.layers = {1, 1, 0};
  g.add_root("S", {}, 1.0);
  g.add_binary("S", {}, "A", {}, "B", {}, 1.0);
  g.add_lexical("A", {}, "x", 1.0);
  g.add_lexical("B", {}, "y", 1.0);
  g.finalize();
  auto w = build_naive({"y", "x"});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto r = sample_one(prune_grammar(g, w), w, seed);
    ASSERT_TRUE(r.candidate);
    EXPECT_EQ(r.candidate->tokens, (Tokens{"x", "y"}));
    EXPECT_NEAR(r.candidate->derivation.logp, 0.0, 1e-15);
  }
  // The only string is the question itself.
  EXPECT_TRUE(sample_many({"x", "y"}, g, build_naive({"x", "y"}), 10, 1).empty());
  EXPECT_EQ(sample_many({"y", "x"}, g, w, 10, 1).size(), 1u);
}

TEST(Sample, ThreeStringToy) {
  LatentGrammar g;
  g.layers = {1, 1, 0};
  g.add_root("S", {}, 1.0);
  g.add_binary("S", {}, "A", {}, "B", {}, 1.0);
  g.add_lexical("A", {}, "x", 0.6);
  g.add_lexical("A", {}, "y", 0.3);
  g.add_lexical("A", {}, "w", 0.1);
  g.add_lexical("B", {}, "z", 1.0);
  g.finalize();
  auto w = lattice_of(3, {{0, 1, "x"}, {0, 1, "y"}, {0, 1, "w"}, {1, 2, "z"}});
  auto cands = sample_many({"x", "z"}, g, w, 1000, 3);
  std::set<Tokens> got;
  for (const auto& c : cands) got.insert(c.tokens);
  EXPECT_EQ(got, (std::set<Tokens>{{"y", "z"}, {"w", "z"}}));
  EXPECT_EQ(cands.size(), got.size());
}

TEST(Sample, NaiveLatticeOnlyReorders) {
  auto trees = read_treebank(testing_support::data_path("treebank/train.trees"));
  auto g = train_grammar(trees, 4, 1);
  Tokens q = split_ws("what is the capital of peru");
  auto w = build_naive(q);
  Tokens sorted_q = q;
  std::sort(sorted_q.begin(), sorted_q.end());
  for (const auto& c : sample_many(q, g, w, 100, 1)) {
    EXPECT_NE(c.tokens, q);
    EXPECT_TRUE(on_single_path(w, c.consumed_path));
    Tokens s = c.tokens;
    std::sort(s.begin(), s.end());
    EXPECT_TRUE(std::includes(sorted_q.begin(), sorted_q.end(), s.begin(), s.end())) << join(c.tokens);
  }
}

TEST(Sample, CitizensExcludesRemovedPaths) {
  // Two noun slots, each free to emit any of the alternatives; after
  // "citizens" is emitted the other people-paths are gone.
  LatentGrammar g;
  g.layers = {1, 1, 0};
  g.add_root("S", {}, 1.0);
  g.add_binary("S", {}, "N", {}, "V", {}, 1.0);
  for (const char* n : {"people", "citizens", "population"}) g.add_lexical("N", {}, n, 1.0 / 3.0);
  for (const char* v : {"speak", "people", "population"}) g.add_lexical("V", {}, v, 1.0 / 3.0);
  g.finalize();
  ParaphraseRuleDB db;
  db.rules = {{{"people"}, {"citizens"}, 1.0}, {{"people"}, {"population"}, 1.0}};
  auto w = build_from_rules({"people", "speak"}, db);
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    auto r = sample_one(prune_grammar(g, w), w, seed);
    if (!r.candidate) continue;
    const auto& t = r.candidate->tokens;
    if (t[0] != "citizens") continue;
    ++hits;
    EXPECT_EQ(t[1], "speak");
  }
  EXPECT_GT(hits, 0);
}

// 1,000 samples over randomized multi-path lattices: every consumed edge
// sequence lies on one source-sink path of the original lattice.
TEST(SampleProperties, PathInvariantOnRandomLattices) {
  std::mt19937_64 rng(99);
  int candidates = 0;
  for (int attempt = 0; attempt < 200000 && candidates < 1000; ++attempt) {
    auto g = testing_support::random_grammar(rng, 1 + attempt % 2);
    auto w = testing_support::random_ab_lattice(rng, 3 + attempt % 4, 4);
    std::optional<PrunedGrammar> pg;
    try {
      pg.emplace(prune_grammar(g, w));
    } catch (const Error&) {
      continue;
    }
    for (std::uint64_t s = 0; s < 20; ++s) {
      auto r = sample_one(*pg, w, s);
      if (!r.candidate) continue;
      ++candidates;
      ASSERT_TRUE(on_single_path(w, r.candidate->consumed_path));
      ASSERT_TRUE(tokens_match_path(w, *r.candidate));
    }
  }
  EXPECT_GE(candidates, 1000);
}

TEST(Sample, ControlledRemovalKeepsPaths) {
  auto g = crossing_grammar();
  auto w = diamond();
  std::map<Tokens, int> seen;
  for (std::uint64_t seed = 0; seed < 400; ++seed) {
    auto r = sample_one(prune_grammar(g, w), w, seed);
    ASSERT_TRUE(r.candidate);
    ++seen[r.candidate->tokens];
    EXPECT_TRUE(on_single_path(w, r.candidate->consumed_path));
  }
  EXPECT_EQ(seen.size(), 2u);
  EXPECT_TRUE(seen.count({"a", "b"}));
  EXPECT_TRUE(seen.count({"c", "d"}));
}

TEST(Sample, RepruneAfterRemovalStaysConsistent) {
  auto g = crossing_grammar();
  auto w = diamond();
  for (const auto& e : w.edges) {
    auto pg = prune_grammar(g, w);
    auto r = remove_conflicting(w, e.id);
    pg.reprune(r);
    EXPECT_TRUE(check_pruned(pg, r).empty());
    EXPECT_EQ(pg.alive_rule_count(), 3u);
  }
}

TEST(Sample, DepthCapOnDeepGrammar) {
  // Right-branching chain S -> A S, ending with probability 0.01 per level.
  LatentGrammar g;
  g.layers = {1, 1, 0};
  g.add_root("S", {}, 1.0);
  g.add_binary("S", {}, "A", {}, "S", {}, 0.99);
  g.add_binary("S", {}, "A", {}, "A", {}, 0.01);
  g.add_lexical("A", {}, "a", 1.0);
  g.finalize();
  auto w = build_naive({"a", "a"});
  int capped = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto r = sample_one(prune_grammar(g, w), w, seed);
    if (r.failure == SampleFailure::DepthCap) {
      ++capped;
      EXPECT_FALSE(r.candidate);
    }
  }
  EXPECT_GT(capped, 0);
}

TEST(Sample, SizeCapOnExplosiveGrammar) {
  LatentGrammar g;
  g.layers = {1, 1, 0};
  g.add_root("S", {}, 1.0);
  g.add_binary("S", {}, "S", {}, "S", {}, 0.95);
  g.add_binary("S", {}, "A", {}, "A", {}, 0.05);
  g.add_lexical("A", {}, "a", 1.0);
  g.finalize();
  auto w = build_naive({"a", "a"});
  int failed = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto r = sample_one(prune_grammar(g, w), w, seed);
    if (r.failure != SampleFailure::None) {
      ++failed;
      EXPECT_FALSE(r.candidate);
    }
  }
  EXPECT_GT(failed, 0);
}

TEST(Sample, Deterministic) {
  auto trees = read_treebank(testing_support::data_path("treebank/train.trees"));
  auto g = train_grammar(trees, 4, 1);
  auto db = load_rule_db(testing_support::data_path("rules/rules200.tsv"));
  Tokens q = split_ws("what language is spoken in peru");
  auto w = build_from_rules(q, db);
  auto a = sample_many(q, g, w, 30, 5);
  auto b = sample_many(q, g, w, 30, 5);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].tokens, b[i].tokens);
    EXPECT_EQ(a[i].seed, b[i].seed);
  }
}

// Without path conflicts the sampler draws from the grammar's own
// distribution: 3 x 4 independent word choices, checked with Pearson's test.
TEST(SampleProperties, MatchesGrammarDistribution) {
  LatentGrammar g;
  g.layers = {1, 1, 0};
  g.add_root("S", {}, 1.0);
  g.add_binary("S", {}, "A", {}, "B", {}, 1.0);
  const std::vector<double> pa = {0.5, 0.3, 0.2}, pb = {0.4, 0.3, 0.2, 0.1};
  std::vector<std::tuple<int, int, std::string>> edges;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    g.add_lexical("A", {}, "x" + std::to_string(i), pa[i]);
    edges.push_back({0, 1, "x" + std::to_string(i)});
  }
  for (std::size_t j = 0; j < pb.size(); ++j) {
    g.add_lexical("B", {}, "y" + std::to_string(j), pb[j]);
    edges.push_back({1, 2, "y" + std::to_string(j)});
  }
  g.finalize();
  auto w = lattice_of(3, edges);
  auto pg = prune_grammar(g, w);

  const int n = 10000;
  std::map<Tokens, int> counts;
  for (int s = 0; s < n; ++s) {
    auto r = sample_one(pg, w, static_cast<std::uint64_t>(s) + 1000);
    ASSERT_TRUE(r.candidate);
    ++counts[r.candidate->tokens];
  }
  double chi2 = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i)
    for (std::size_t j = 0; j < pb.size(); ++j) {
      double expect = n * pa[i] * pb[j];
      double got = counts[{"x" + std::to_string(i), "y" + std::to_string(j)}];
      chi2 += (got - expect) * (got - expect) / expect;
    }
  boost::math::chi_squared dist(static_cast<double>(pa.size() * pb.size() - 1));
  double p = 1.0 - boost::math::cdf(dist, chi2);
  EXPECT_GT(p, 0.01) << "chi2=" << chi2;
}

// Every candidate uses lattice words from one source-sink path.
TEST(SampleProperties, CandidatesAreLatticePaths) {
  auto trees = read_treebank(testing_support::data_path("treebank/train.trees"));
  auto g = train_grammar(trees, 4, 1);
  auto db = load_rule_db(testing_support::data_path("rules/rules200.tsv"));
  int total = 0;
  for (const auto& line : read_lines(testing_support::data_path("treebank/heldout.txt"))) {
    auto q = split_ws(line);
    if (q.empty()) continue;
    auto w = build_from_rules(q, db);
    std::vector<ParaphraseCandidate> cands;
    try {
      cands = sample_many(q, g, w, 10, 7);
    } catch (const Error& e) {
      ASSERT_EQ(e.code(), Errc::EmptyIntersection);
      continue;
    }
    auto vocab = w.vocabulary();
    for (const auto& c : cands) {
      ++total;
      for (const auto& t : c.tokens) EXPECT_TRUE(vocab.count(t)) << t;
      EXPECT_TRUE(tokens_match_path(w, c)) << join(c.tokens);
      EXPECT_TRUE(on_single_path(w, c.consumed_path));
      EXPECT_NE(c.tokens, lower_all(q));
    }
  }
  EXPECT_GT(total, 0);
}

TEST(SampleProperties, FigureOneVocabulary) {
  auto trees = read_treebank(testing_support::data_path("treebank/train.trees"));
  auto g = train_grammar(trees, 4, 1);
  Tokens q = {"what", "language", "do", "people", "in", "czech", "republic", "speak"};
  auto w = build_from_rules(q, load_rule_db(testing_support::data_path("fixtures/figure1_rules.tsv")));
  auto cands = sample_many(q, g, w, 50, 1);
  auto vocab = w.vocabulary();
  for (const auto& c : cands) {
    for (const auto& t : c.tokens) EXPECT_TRUE(vocab.count(t));
    EXPECT_TRUE(on_single_path(w, c.consumed_path)) << join(c.tokens);
    EXPECT_TRUE(tokens_match_path(w, c));
  }
}

TEST(Detokenize, DropsIntermediates) {
  EXPECT_EQ(detokenize({"what", "@SQ", "is"}), "what is");
  EXPECT_EQ(detokenize({}), "");
}
