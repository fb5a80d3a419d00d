#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "lpgen/error.hpp"
#include "lpgen/grammar.hpp"
#include "lpgen/lattice.hpp"
#include "lpgen/parser.hpp"
#include "lpgen/treebank.hpp"
#include "lpgen/util.hpp"

namespace lpgen {

inline constexpr int kMaxSampleDepth = 32;
/// Derivations are also cut off at this many nodes: a breadth-first frontier
/// under a recursive grammar can grow exponentially long before depth 32.
inline constexpr std::size_t kMaxSampleNodes = 1u << 14;

/// A grammar restricted to the words of a lattice. Rules and contexts are
/// re-indexed densely over the support that survived the initial pruning;
/// later re-pruning only flips alive flags. Conditional distributions are
/// not renormalized: draws renormalize over the alive support.
class PrunedGrammar {
 public:
  struct Bin {
    std::uint32_t rule;
    int parent, left, right;
  };
  struct Lex {
    std::uint32_t rule;
    int parent;
    WordId word;
  };
  struct Root {
    std::uint32_t index;
    int ctx;
  };

  PrunedGrammar(const LatentGrammar& g, const WordLattice& w) : g_(&g) {
    std::vector<char> words(g.words.size(), 0);
    for (const auto& tok : w.vocabulary()) {
      WordId id = g.find_word(tok);
      if (id < g.words.size()) words[id] = 1;
    }

    // Productive closure over the full grammar.
    std::unordered_map<ContextKey, int> full_id;
    auto id_of = [&](ContextKey k) {
      auto [it, fresh] = full_id.emplace(k, static_cast<int>(full_id.size()));
      return it->second;
    };
    std::vector<char> lex_ok(g.lexical.size(), 0);
    std::vector<int> productive_seed;
    for (std::uint32_t i = 0; i < g.lexical.size(); ++i) {
      const auto& r = g.lexical[i];
      if (!words[r.word]) continue;
      lex_ok[i] = 1;
      productive_seed.push_back(id_of(context_key(r.parent, r.parent_state)));
    }
    std::vector<std::array<int, 3>> bin_ctx(g.binary.size());
    for (std::uint32_t i = 0; i < g.binary.size(); ++i) {
      const auto& r = g.binary[i];
      bin_ctx[i] = {id_of(context_key(r.parent, r.parent_state)), id_of(context_key(r.left, r.left_state)),
                    id_of(context_key(r.right, r.right_state))};
    }
    std::vector<char> prod(full_id.size(), 0);
    std::vector<char> bin_ok(g.binary.size(), 0);
    closure(bin_ctx, productive_seed, prod, bin_ok);

    // Dense tables over the surviving support.
    std::vector<int> remap(full_id.size(), -1);
    std::vector<ContextKey> full_keys(full_id.size());
    for (const auto& [k, i] : full_id) full_keys[static_cast<std::size_t>(i)] = k;
    auto dense = [&](int full) {
      if (remap[static_cast<std::size_t>(full)] < 0) {
        remap[static_cast<std::size_t>(full)] = static_cast<int>(ctx_keys_.size());
        ctx_keys_.push_back(full_keys[static_cast<std::size_t>(full)]);
      }
      return remap[static_cast<std::size_t>(full)];
    };
    for (std::uint32_t i = 0; i < g.lexical.size(); ++i)
      if (lex_ok[i]) lexes_.push_back({i, dense(id_of(context_key(g.lexical[i].parent, g.lexical[i].parent_state))),
                                       g.lexical[i].word});
    for (std::uint32_t i = 0; i < g.binary.size(); ++i)
      if (bin_ok[i]) bins_.push_back({i, dense(bin_ctx[i][0]), dense(bin_ctx[i][1]), dense(bin_ctx[i][2])});
    for (std::uint32_t i = 0; i < g.roots.size(); ++i) {
      auto it = full_id.find(context_key(g.roots[i].symbol, g.roots[i].state));
      if (it != full_id.end() && prod[static_cast<std::size_t>(it->second)])
        roots_.push_back({i, dense(it->second)});
    }
    if (roots_.empty()) throw Error(Errc::EmptyIntersection, "no root symbol can derive a string over the lattice");

    const std::size_t nctx = ctx_keys_.size();
    for (std::size_t i = 0; i < nctx; ++i) ctx_index_.emplace(ctx_keys_[i], static_cast<int>(i));
    bins_by_parent_.resize(nctx);
    bins_by_child_.resize(nctx);
    lexes_by_parent_.resize(nctx);
    for (int i = 0; i < static_cast<int>(bins_.size()); ++i) {
      const auto& b = bins_[static_cast<std::size_t>(i)];
      bins_by_parent_[static_cast<std::size_t>(b.parent)].push_back(i);
      bins_by_child_[static_cast<std::size_t>(b.left)].push_back(i);
      if (b.right != b.left) bins_by_child_[static_cast<std::size_t>(b.right)].push_back(i);
    }
    for (int i = 0; i < static_cast<int>(lexes_.size()); ++i)
      lexes_by_parent_[static_cast<std::size_t>(lexes_[static_cast<std::size_t>(i)].parent)].push_back(i);
    ctx_alive_.assign(nctx, 1);
    bin_alive_.assign(bins_.size(), 1);
    lex_alive_.assign(lexes_.size(), 1);
  }

  /// Restricts the support to words still present in `w` and recomputes
  /// the productive closure over the remaining rules.
  void reprune(const WordLattice& w) {
    std::set<WordId> words;
    for (const auto& tok : w.vocabulary()) {
      WordId id = g_->find_word(tok);
      if (id < g_->words.size()) words.insert(id);
    }
    std::vector<int> seed;
    for (std::size_t i = 0; i < lexes_.size(); ++i) {
      lex_alive_[i] = lex_alive_[i] && words.count(lexes_[i].word);
      if (lex_alive_[i]) seed.push_back(lexes_[i].parent);
    }
    std::vector<char> prod(ctx_keys_.size(), 0);
    std::vector<char> ok(bins_.size(), 0);
    std::vector<int> missing(bins_.size(), 0);
    for (std::size_t i = 0; i < bins_.size(); ++i)
      missing[i] = bin_alive_[i] ? (bins_[i].left == bins_[i].right ? 1 : 2) : -1;
    std::vector<int> queue;
    for (int c : seed)
      if (!prod[static_cast<std::size_t>(c)]) {
        prod[static_cast<std::size_t>(c)] = 1;
        queue.push_back(c);
      }
    while (!queue.empty()) {
      int c = queue.back();
      queue.pop_back();
      for (int bi : bins_by_child_[static_cast<std::size_t>(c)]) {
        auto& m = missing[static_cast<std::size_t>(bi)];
        if (m <= 0) continue;
        if (--m == 0) {
          ok[static_cast<std::size_t>(bi)] = 1;
          int p = bins_[static_cast<std::size_t>(bi)].parent;
          if (!prod[static_cast<std::size_t>(p)]) {
            prod[static_cast<std::size_t>(p)] = 1;
            queue.push_back(p);
          }
        }
      }
    }
    ctx_alive_ = std::move(prod);
    bin_alive_ = std::move(ok);
  }

  const LatentGrammar& grammar() const { return *g_; }

  /// Dense context id, or -1 when the context did not survive pruning.
  int context(SymbolId s, const State& h) const {
    auto it = ctx_index_.find(context_key(s, h));
    return it == ctx_index_.end() ? -1 : it->second;
  }
  ContextKey context_key_of(int ctx) const { return ctx_keys_[static_cast<std::size_t>(ctx)]; }
  bool alive(int ctx) const { return ctx >= 0 && ctx_alive_[static_cast<std::size_t>(ctx)]; }

  const std::vector<Bin>& bins() const { return bins_; }
  const std::vector<Lex>& lexes() const { return lexes_; }
  const std::vector<Root>& roots() const { return roots_; }
  bool bin_alive(int i) const { return bin_alive_[static_cast<std::size_t>(i)]; }
  bool lex_alive(int i) const { return lex_alive_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& bins_of(int ctx) const { return bins_by_parent_[static_cast<std::size_t>(ctx)]; }
  const std::vector<int>& lexes_of(int ctx) const { return lexes_by_parent_[static_cast<std::size_t>(ctx)]; }
  std::size_t num_contexts() const { return ctx_keys_.size(); }

  std::size_t alive_rule_count() const {
    std::size_t n = 0;
    for (char c : bin_alive_) n += c != 0;
    for (char c : lex_alive_) n += c != 0;
    return n;
  }

 private:
  static void closure(const std::vector<std::array<int, 3>>& bins, const std::vector<int>& seed, std::vector<char>& prod,
                      std::vector<char>& bin_ok) {
    std::vector<std::vector<int>> by_child(prod.size());
    std::vector<int> missing(bins.size());
    for (int i = 0; i < static_cast<int>(bins.size()); ++i) {
      const auto& b = bins[static_cast<std::size_t>(i)];
      by_child[static_cast<std::size_t>(b[1])].push_back(i);
      if (b[2] != b[1]) by_child[static_cast<std::size_t>(b[2])].push_back(i);
      missing[static_cast<std::size_t>(i)] = b[1] == b[2] ? 1 : 2;
    }
    std::vector<int> queue;
    for (int c : seed)
      if (!prod[static_cast<std::size_t>(c)]) {
        prod[static_cast<std::size_t>(c)] = 1;
        queue.push_back(c);
      }
    while (!queue.empty()) {
      int c = queue.back();
      queue.pop_back();
      for (int bi : by_child[static_cast<std::size_t>(c)]) {
        if (--missing[static_cast<std::size_t>(bi)] == 0) {
          bin_ok[static_cast<std::size_t>(bi)] = 1;
          int p = bins[static_cast<std::size_t>(bi)][0];
          if (!prod[static_cast<std::size_t>(p)]) {
            prod[static_cast<std::size_t>(p)] = 1;
            queue.push_back(p);
          }
        }
      }
    }
  }

  const LatentGrammar* g_;
  std::vector<ContextKey> ctx_keys_;
  std::unordered_map<ContextKey, int> ctx_index_;
  std::vector<Bin> bins_;
  std::vector<Lex> lexes_;
  std::vector<Root> roots_;
  std::vector<std::vector<int>> bins_by_parent_, bins_by_child_, lexes_by_parent_;
  std::vector<char> ctx_alive_, bin_alive_, lex_alive_;
};

inline PrunedGrammar prune_grammar(const LatentGrammar& g, const WordLattice& w) { return PrunedGrammar(g, w); }

/// Problems with a pruned grammar against the lattice it is tied to: alive
/// lexical rules must use lattice words, and every alive context must be
/// productive (checked by naive fixpoint iteration).
inline std::vector<std::string> check_pruned(const PrunedGrammar& pg, const WordLattice& w) {
  std::vector<std::string> issues;
  const auto& g = pg.grammar();
  std::set<WordId> words;
  for (const auto& tok : w.vocabulary()) words.insert(g.find_word(tok));
  std::vector<char> prod(pg.num_contexts(), 0);
  for (int i = 0; i < static_cast<int>(pg.lexes().size()); ++i) {
    if (!pg.lex_alive(i)) continue;
    const auto& l = pg.lexes()[static_cast<std::size_t>(i)];
    if (!words.count(l.word)) issues.push_back("alive lexical rule over absent word '" + g.words.name(l.word) + "'");
    prod[static_cast<std::size_t>(l.parent)] = 1;
  }
  for (bool changed = true; changed;) {
    changed = false;
    for (int i = 0; i < static_cast<int>(pg.bins().size()); ++i) {
      if (!pg.bin_alive(i)) continue;
      const auto& b = pg.bins()[static_cast<std::size_t>(i)];
      if (prod[static_cast<std::size_t>(b.left)] && prod[static_cast<std::size_t>(b.right)] &&
          !prod[static_cast<std::size_t>(b.parent)]) {
        prod[static_cast<std::size_t>(b.parent)] = 1;
        changed = true;
      }
    }
  }
  for (int c = 0; c < static_cast<int>(pg.num_contexts()); ++c)
    if (pg.alive(c) && !prod[static_cast<std::size_t>(c)])
      issues.push_back("alive context " + std::to_string(c) + " cannot derive a string");
  return issues;
}

struct ParaphraseCandidate {
  Tokens tokens;
  DerivationTree derivation;
  std::vector<int> consumed_path;  // lattice edge ids, emission order
  std::uint64_t seed = 0;
  double score = 0.0;
};

enum class SampleFailure { None, DeadEnd, DepthCap, SizeCap };

struct SampleResult {
  std::optional<ParaphraseCandidate> candidate;
  SampleFailure failure = SampleFailure::None;
  int depth_cap = kMaxSampleDepth;
};

/// Top-down breadth-first sampling with controlled path removal: emitting a
/// word through lattice edge e drops every edge that shares no source-sink
/// path with e and re-prunes the grammar.
inline SampleResult sample_one(PrunedGrammar pg, WordLattice w, std::uint64_t seed) {
  const auto& g = pg.grammar();
  Rng rng(seed);
  SampleResult res;

  std::vector<double> weights;
  for (const auto& r : pg.roots()) weights.push_back(pg.alive(r.ctx) ? g.roots[r.index].prob : 0.0);
  std::size_t pick = draw_weighted(rng, weights);
  if (pick >= weights.size()) {
    res.failure = SampleFailure::DeadEnd;
    return res;
  }

  ParaphraseCandidate cand;
  cand.seed = seed;
  auto& d = cand.derivation;
  d.logp = g.roots[pg.roots()[pick].index].logp;
  {
    auto [sym, st] = detail::unpack_key(pg.context_key_of(pg.roots()[pick].ctx));
    d.nodes.push_back({sym, st, "", -1, -1});
  }
  struct Pending {
    int node;
    int ctx;
    int depth;
  };
  std::deque<Pending> frontier{{0, pg.roots()[pick].ctx, 0}};

  while (!frontier.empty()) {
    Pending p = frontier.front();
    frontier.pop_front();
    if (p.depth > kMaxSampleDepth) {
      res.failure = SampleFailure::DepthCap;
      return res;
    }
    if (!pg.alive(p.ctx)) {
      res.failure = SampleFailure::DeadEnd;
      return res;
    }
    const auto& lex = pg.lexes_of(p.ctx);
    bool lexical_ctx = !lex.empty();
    if (lexical_ctx) {
      weights.clear();
      for (int li : lex) weights.push_back(pg.lex_alive(li) ? g.lexical[pg.lexes()[static_cast<std::size_t>(li)].rule].prob : 0.0);
      std::size_t k = draw_weighted(rng, weights);
      if (k >= weights.size()) {
        res.failure = SampleFailure::DeadEnd;
        return res;
      }
      const auto& l = pg.lexes()[static_cast<std::size_t>(lex[k])];
      std::vector<int> edges;
      for (const auto& e : w.edges)
        if (g.find_word(e.token) == l.word) edges.push_back(e.id);
      if (edges.empty()) {
        res.failure = SampleFailure::DeadEnd;
        return res;
      }
      int eid = edges[uniform_index(rng, edges.size())];
      d.nodes[static_cast<std::size_t>(p.node)].word = w.find_edge(eid)->token;
      d.logp += g.lexical[l.rule].logp;
      cand.consumed_path.push_back(eid);
      WordLattice next = remove_conflicting(w, eid);
      if (next.edges.size() != w.edges.size()) {
        w = std::move(next);
        pg.reprune(w);
      }
      continue;
    }
    const auto& bins = pg.bins_of(p.ctx);
    weights.clear();
    for (int bi : bins) weights.push_back(pg.bin_alive(bi) ? g.binary[pg.bins()[static_cast<std::size_t>(bi)].rule].prob : 0.0);
    std::size_t k = draw_weighted(rng, weights);
    if (k >= weights.size()) {
      res.failure = SampleFailure::DeadEnd;
      return res;
    }
    if (d.nodes.size() + 2 > kMaxSampleNodes) {
      res.failure = SampleFailure::SizeCap;
      return res;
    }
    const auto& b = pg.bins()[static_cast<std::size_t>(bins[k])];
    const auto& rule = g.binary[b.rule];
    d.logp += rule.logp;
    int l = static_cast<int>(d.nodes.size());
    d.nodes.push_back({rule.left, rule.left_state, "", -1, -1});
    int r = static_cast<int>(d.nodes.size());
    d.nodes.push_back({rule.right, rule.right_state, "", -1, -1});
    d.nodes[static_cast<std::size_t>(p.node)].left = l;
    d.nodes[static_cast<std::size_t>(p.node)].right = r;
    frontier.push_back({l, b.left, p.depth + 1});
    frontier.push_back({r, b.right, p.depth + 1});
  }
  cand.tokens = d.yield();
  res.candidate = std::move(cand);
  return res;
}

/// Strips binarization markers from a token sequence and joins with spaces.
inline std::string detokenize(const Tokens& toks) {
  Tokens out;
  for (const auto& t : toks)
    if (!is_intermediate(t)) out.push_back(t);
  return join(out);
}

struct SampleStats {
  int attempts = 0;
  int dead_ends = 0;
  int depth_capped = 0;
  int size_capped = 0;
};

/// Runs sample_one with seeds seed..seed+m-1, keeps the first candidate for
/// each distinct token sequence, and drops the input question itself.
inline std::vector<ParaphraseCandidate> sample_many(const Tokens& question, const LatentGrammar& g,
                                                    const WordLattice& w, int m_samples, std::uint64_t seed,
                                                    SampleStats* stats = nullptr) {
  if (m_samples < 1) throw Error(Errc::MalformedInput, "m_samples must be >= 1");
  PrunedGrammar pg = prune_grammar(g, w);
  Tokens q = lower_all(question);
  std::set<Tokens> seen;
  std::vector<ParaphraseCandidate> out;
  for (int i = 0; i < m_samples; ++i) {
    auto res = sample_one(pg, w, seed + static_cast<std::uint64_t>(i));
    if (stats) {
      ++stats->attempts;
      stats->dead_ends += res.failure == SampleFailure::DeadEnd;
      stats->depth_capped += res.failure == SampleFailure::DepthCap;
      stats->size_capped += res.failure == SampleFailure::SizeCap;
    }
    if (!res.candidate) continue;
    Tokens key = lower_all(res.candidate->tokens);
    if (key == q || !seen.insert(key).second) continue;
    out.push_back(std::move(*res.candidate));
  }
  return out;
}

}  // namespace lpgen
