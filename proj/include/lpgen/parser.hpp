#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "lpgen/error.hpp"
#include "lpgen/grammar.hpp"
#include "lpgen/util.hpp"

namespace lpgen {

struct DerivationNode {
  SymbolId symbol = 0;
  State state;
  std::string word;  // set iff lexical
  int left = -1;
  int right = -1;

  bool is_lexical() const { return left < 0; }
};

/// A derivation with latent states; node 0 is the root.
struct DerivationTree {
  std::vector<DerivationNode> nodes;
  double logp = -std::numeric_limits<double>::infinity();

  Tokens yield() const {
    Tokens out;
    if (!nodes.empty()) collect(0, out);
    return out;
  }

 private:
  void collect(int id, Tokens& out) const {
    const auto& n = nodes[static_cast<std::size_t>(id)];
    if (n.is_lexical()) {
      out.push_back(n.word);
      return;
    }
    collect(n.left, out);
    collect(n.right, out);
  }
};

/// "(SBARQ-33-403 (WHNP-7-291 (WP-7-254 what) ...))"
inline std::string render(const DerivationTree& d, const LatentGrammar& g, int id = 0) {
  const auto& n = d.nodes[static_cast<std::size_t>(id)];
  std::string head = state_label(g.symbols.name(n.symbol), n.state, g.layers.layers);
  if (n.is_lexical()) return "(" + head + " " + n.word + ")";
  return "(" + head + " " + render(d, g, n.left) + " " + render(d, g, n.right) + ")";
}

/// Log-probability of a derivation evaluated rule by rule; -inf if any
/// configuration is not a rule of the grammar.
inline double rescore(const DerivationTree& d, const LatentGrammar& g) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  if (d.nodes.empty()) return kNegInf;
  const auto& root = d.nodes[0];
  double total = kNegInf;
  for (const auto& r : g.roots)
    if (r.symbol == root.symbol && r.state == root.state) total = r.logp;
  if (total == kNegInf) return kNegInf;
  for (const auto& n : d.nodes) {
    double best = kNegInf;
    if (n.is_lexical()) {
      WordId w = g.find_word(n.word);
      for (auto idx : g.lexical_rules(n.symbol, n.state))
        if (g.lexical[idx].word == w) best = g.lexical[idx].logp;
    } else {
      const auto& l = d.nodes[static_cast<std::size_t>(n.left)];
      const auto& r = d.nodes[static_cast<std::size_t>(n.right)];
      for (auto idx : g.binary_rules(n.symbol, n.state)) {
        const auto& b = g.binary[idx];
        if (b.left == l.symbol && b.left_state == l.state && b.right == r.symbol && b.right_state == r.state)
          best = b.logp;
      }
    }
    if (best == kNegInf) return kNegInf;
    total += best;
  }
  return total;
}

struct ParseOptions {
  /// Unknown tokens rewrite from every preterminal context with this
  /// probability. Parsing only; never used for generation.
  bool unknown_words = false;
  double unknown_prob = 1e-12;
};

namespace detail {

struct ChartItem {
  double score = -std::numeric_limits<double>::infinity();
  std::int32_t rule = -1;  // binary or lexical rule index; -1 for UNK
  std::int32_t split = -1;
  ContextKey left = 0;
  ContextKey right = 0;
};

inline std::pair<SymbolId, State> unpack_key(ContextKey k) {
  return {static_cast<SymbolId>(k >> 40),
          State{static_cast<std::uint32_t>((k >> 20) & 0xFFFFF), static_cast<std::uint32_t>(k & 0xFFFFF)}};
}

}  // namespace detail

/// Viterbi CKY over joint (symbol, state) chart items. Equal-score
/// alternatives are resolved by the smallest (left symbol, left state, right
/// symbol, right state, split point), symbols compared by name; the root by
/// (symbol, state).
inline DerivationTree cky_viterbi(const Tokens& tokens, const LatentGrammar& g, const ParseOptions& opt = {}) {
  using detail::ChartItem;
  const int n = static_cast<int>(tokens.size());
  if (n == 0) throw Error(Errc::ParseFailure, "empty sentence");

  std::vector<std::uint32_t> rank(g.symbols.size());
  {
    std::vector<SymbolId> order(g.symbols.size());
    for (SymbolId s = 0; s < order.size(); ++s) order[s] = s;
    std::sort(order.begin(), order.end(),
              [&](SymbolId a, SymbolId b) { return g.symbols.name(a) < g.symbols.name(b); });
    for (std::uint32_t i = 0; i < order.size(); ++i) rank[order[i]] = i;
  }
  auto ctx_order = [&](ContextKey k) {
    auto [s, h] = detail::unpack_key(k);
    return std::tuple{rank[s], h.syn, h.sem};
  };

  std::unordered_map<ContextKey, std::vector<std::uint32_t>> by_left;
  for (std::uint32_t i = 0; i < g.binary.size(); ++i) {
    const auto& r = g.binary[i];
    by_left[context_key(r.left, r.left_state)].push_back(i);
  }

  std::vector<std::unordered_map<ContextKey, ChartItem>> chart(static_cast<std::size_t>((n + 1) * (n + 1)));
  auto cell = [&](int i, int j) -> auto& { return chart[static_cast<std::size_t>(i * (n + 1) + j)]; };

  for (int i = 0; i < n; ++i) {
    auto& c = cell(i, i + 1);
    WordId w = g.find_word(tokens[static_cast<std::size_t>(i)]);
    if (w < g.words.size()) {
      for (auto idx : g.lexical_rules_for_word(w)) {
        const auto& r = g.lexical[idx];
        auto& item = c[context_key(r.parent, r.parent_state)];
        item.score = r.logp;
        item.rule = static_cast<std::int32_t>(idx);
      }
    } else if (opt.unknown_words) {
      double lp = std::log(opt.unknown_prob);
      for (const auto& [key, rules] : g.lexical_index()) {
        auto& item = c[key];
        item.score = lp;
        item.rule = -1;
      }
    }
  }

  for (int len = 2; len <= n; ++len) {
    for (int i = 0; i + len <= n; ++i) {
      int j = i + len;
      auto& target = cell(i, j);
      for (int k = i + 1; k < j; ++k) {
        const auto& lc = cell(i, k);
        const auto& rc = cell(k, j);
        if (lc.empty() || rc.empty()) continue;
        for (const auto& [lkey, litem] : lc) {
          auto it = by_left.find(lkey);
          if (it == by_left.end()) continue;
          for (auto idx : it->second) {
            const auto& r = g.binary[idx];
            ContextKey rkey = context_key(r.right, r.right_state);
            auto rit = rc.find(rkey);
            if (rit == rc.end()) continue;
            double s = r.logp + litem.score + rit->second.score;
            auto& item = target[context_key(r.parent, r.parent_state)];
            bool better = s > item.score;
            if (!better && s == item.score) {
              auto cand = std::tuple_cat(ctx_order(lkey), ctx_order(rkey), std::tuple{k});
              auto cur = std::tuple_cat(ctx_order(item.left), ctx_order(item.right), std::tuple{item.split});
              better = cand < cur;
            }
            if (better) {
              item.score = s;
              item.rule = static_cast<std::int32_t>(idx);
              item.split = k;
              item.left = lkey;
              item.right = rkey;
            }
          }
        }
      }
    }
  }

  const auto& top = cell(0, n);
  double best = -std::numeric_limits<double>::infinity();
  ContextKey best_key = 0;
  bool found = false;
  for (const auto& r : g.roots) {
    ContextKey k = context_key(r.symbol, r.state);
    auto it = top.find(k);
    if (it == top.end()) continue;
    double s = r.logp + it->second.score;
    if (!found || s > best || (s == best && ctx_order(k) < ctx_order(best_key))) {
      best = s;
      best_key = k;
      found = true;
    }
  }
  if (!found) throw Error(Errc::ParseFailure, "no complete derivation for '" + join(tokens) + "'");

  DerivationTree d;
  d.logp = best;
  // Iterative rebuild in preorder.
  struct Frame {
    int i, j;
    ContextKey key;
    int slot;
  };
  std::vector<Frame> stack{{0, n, best_key, 0}};
  d.nodes.emplace_back();
  while (!stack.empty()) {
    Frame f = stack.back();
    stack.pop_back();
    const auto& item = cell(f.i, f.j).at(f.key);
    auto [sym, st] = detail::unpack_key(f.key);
    auto& node = d.nodes[static_cast<std::size_t>(f.slot)];
    node.symbol = sym;
    node.state = st;
    if (f.j - f.i == 1) {
      node.word = tokens[static_cast<std::size_t>(f.i)];
      continue;
    }
    int l = static_cast<int>(d.nodes.size());
    d.nodes.emplace_back();
    int r = static_cast<int>(d.nodes.size());
    d.nodes.emplace_back();
    d.nodes[static_cast<std::size_t>(f.slot)].left = l;
    d.nodes[static_cast<std::size_t>(f.slot)].right = r;
    stack.push_back({item.split, f.j, item.right, r});
    stack.push_back({f.i, item.split, item.left, l});
  }
  return d;
}

}  // namespace lpgen
