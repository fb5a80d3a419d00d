#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <tuple>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "lpgen/grammar.hpp"
#include "lpgen/lattice.hpp"
#include "lpgen/util.hpp"

namespace testing_support {

inline std::filesystem::path data_path(const std::string& rel) { return std::filesystem::path(LPGEN_DATA_DIR) / rel; }

inline std::filesystem::path temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "lpgen-tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

/// Random normalized weights of length n (each > 0).
inline std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> w(n);
  double s = 0;
  for (auto& x : w) s += (x = u(rng));
  for (auto& x : w) x /= s;
  return w;
}

/// Random one-layer grammar over three symbols: interminal S (also the root)
/// and preterminals P, Q over words {a, b}. Every (symbol, state) context
/// gets a full distribution; roughly 60% of possible rules are kept.
inline lpgen::LatentGrammar random_grammar(std::mt19937_64& rng, int m) {
  using lpgen::State;
  lpgen::LatentGrammar g;
  g.layers = {1, m, 0};
  const std::vector<std::string> inter = {"S"}, pre = {"P", "Q"}, words = {"a", "b"};
  std::vector<std::string> all = inter;
  all.insert(all.end(), pre.begin(), pre.end());
  // Root over S states.
  auto rw = random_simplex(rng, static_cast<std::size_t>(m));
  for (int h = 0; m > h; ++h) g.add_root("S", State{static_cast<std::uint32_t>(h), 0}, rw[static_cast<std::size_t>(h)]);
  std::bernoulli_distribution keep(0.6);
  for (const auto& a : inter) {
    for (int h = 0; h < m; ++h) {
      struct R {
        std::string b, c;
        int hb, hc;
      };
      std::vector<R> rules;
      for (const auto& b : all)
        for (const auto& c : all)
          for (int hb = 0; hb < m; ++hb)
            for (int hc = 0; hc < m; ++hc)
              if (keep(rng)) rules.push_back({b, c, hb, hc});
      if (rules.empty()) rules.push_back({"P", "Q", 0, 0});
      auto w = random_simplex(rng, rules.size());
      for (std::size_t i = 0; i < rules.size(); ++i)
        g.add_binary(a, State{static_cast<std::uint32_t>(h), 0}, rules[i].b,
                     State{static_cast<std::uint32_t>(rules[i].hb), 0}, rules[i].c,
                     State{static_cast<std::uint32_t>(rules[i].hc), 0}, w[i]);
    }
  }
  for (const auto& p : pre) {
    for (int h = 0; h < m; ++h) {
      std::vector<std::string> ws;
      for (const auto& x : words)
        if (keep(rng)) ws.push_back(x);
      if (ws.empty()) ws.push_back("a");
      auto w = random_simplex(rng, ws.size());
      for (std::size_t i = 0; i < ws.size(); ++i) g.add_lexical(p, State{static_cast<std::uint32_t>(h), 0}, ws[i], w[i]);
    }
  }
  g.finalize();
  return g;
}

/// Chain of `nodes` nodes plus `extra` random forward edges, tokens drawn
/// from {a, b}. Every edge lies on a source-sink path.
inline lpgen::WordLattice random_ab_lattice(std::mt19937_64& rng, int nodes, int extra) {
  lpgen::WordLattice w;
  w.num_nodes = nodes;
  std::bernoulli_distribution coin(0.5);
  std::uniform_int_distribution<int> pick(0, nodes - 1);
  auto tok = [&] { return std::string(coin(rng) ? "a" : "b"); };
  for (int i = 0; i + 1 < nodes; ++i) w.edges.push_back({i, i + 1, tok(), lpgen::Origin::Input, 0});
  for (int k = 0; k < extra; ++k) {
    int x = pick(rng), y = pick(rng);
    if (x == y) continue;
    if (x > y) std::swap(x, y);
    w.edges.push_back({x, y, tok(), lpgen::Origin::Rule, 0});
  }
  for (std::size_t i = 0; i < w.edges.size(); ++i) w.edges[i].id = static_cast<int>(i);
  return w;
}

/// Max log-probability over all derivations of `toks`: a top-down recursion
/// that tries every rule and every split point (memoized per span and
/// context), written independently of the chart parser.
inline double brute_force_max(const lpgen::LatentGrammar& g, const lpgen::Tokens& toks) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  const int n = static_cast<int>(toks.size());
  std::map<std::tuple<int, int, lpgen::SymbolId, std::uint32_t>, double> memo;
  std::function<double(int, int, lpgen::SymbolId, std::uint32_t)> best = [&](int i, int j, lpgen::SymbolId a,
                                                                               std::uint32_t h) -> double {
    auto key = std::tuple{i, j, a, h};
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    double out = kNegInf;
    if (j - i == 1) {
      for (const auto& r : g.lexical)
        if (r.parent == a && r.parent_state.syn == h && g.words.name(r.word) == toks[static_cast<std::size_t>(i)])
          out = std::max(out, std::log(r.prob));
    } else {
      for (const auto& r : g.binary) {
        if (r.parent != a || r.parent_state.syn != h) continue;
        for (int k = i + 1; k < j; ++k) {
          double l = best(i, k, r.left, r.left_state.syn);
          if (l == kNegInf) continue;
          double rr = best(k, j, r.right, r.right_state.syn);
          if (rr == kNegInf) continue;
          out = std::max(out, std::log(r.prob) + l + rr);
        }
      }
    }
    memo[key] = out;
    return out;
  };
  double top = kNegInf;
  for (const auto& r : g.roots) {
    double s = best(0, n, r.symbol, r.state.syn);
    if (s != kNegInf) top = std::max(top, std::log(r.prob) + s);
  }
  return top;
}

}  // namespace testing_support
