#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "lpgen/error.hpp"
#include "lpgen/grammar.hpp"
#include "lpgen/parser.hpp"
#include "lpgen/util.hpp"

namespace lpgen {

enum class Origin { Input, Rule, Bilayered };

inline const char* origin_name(Origin o) {
  switch (o) {
    case Origin::Input: return "input";
    case Origin::Rule: return "rule";
    case Origin::Bilayered: return "bilayered";
  }
  return "?";
}

inline Origin parse_origin(std::string_view s) {
  if (s == "input") return Origin::Input;
  if (s == "rule") return Origin::Rule;
  if (s == "bilayered") return Origin::Bilayered;
  throw Error(Errc::MalformedInput, "unknown edge origin '" + std::string(s) + "'");
}

/// One token edge. `id` is stable across remove_conflicting.
struct LatticeEdge {
  int from = 0;
  int to = 0;
  std::string token;
  Origin origin = Origin::Input;
  int id = 0;

  bool operator==(const LatticeEdge&) const = default;
};

/// Unweighted token DAG. Nodes are numbered topologically (every edge has
/// from < to); node 0 is the source and node num_nodes-1 the sink.
struct WordLattice {
  int num_nodes = 0;
  std::vector<LatticeEdge> edges;

  int source() const { return 0; }
  int sink() const { return num_nodes - 1; }

  const LatticeEdge* find_edge(int id) const {
    for (const auto& e : edges)
      if (e.id == id) return &e;
    return nullptr;
  }

  std::set<std::string> vocabulary() const {
    std::set<std::string> out;
    for (const auto& e : edges) out.insert(e.token);
    return out;
  }

  bool operator==(const WordLattice&) const = default;
};

/// Forward reachability from `start` (inclusive).
inline std::vector<char> reachable_from(const WordLattice& w, int start) {
  std::vector<char> r(static_cast<std::size_t>(w.num_nodes), 0);
  r[static_cast<std::size_t>(start)] = 1;
  // Edges sorted by from; topological numbering makes one sweep enough.
  std::vector<const LatticeEdge*> sorted;
  for (const auto& e : w.edges) sorted.push_back(&e);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->from < b->from; });
  for (auto* e : sorted)
    if (r[static_cast<std::size_t>(e->from)]) r[static_cast<std::size_t>(e->to)] = 1;
  return r;
}

/// Nodes from which `target` is reachable (inclusive).
inline std::vector<char> reaching(const WordLattice& w, int target) {
  std::vector<char> r(static_cast<std::size_t>(w.num_nodes), 0);
  r[static_cast<std::size_t>(target)] = 1;
  std::vector<const LatticeEdge*> sorted;
  for (const auto& e : w.edges) sorted.push_back(&e);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->to > b->to; });
  for (auto* e : sorted)
    if (r[static_cast<std::size_t>(e->to)]) r[static_cast<std::size_t>(e->from)] = 1;
  return r;
}

/// Lists structural problems; empty when the lattice is well formed.
inline std::vector<std::string> check_lattice(const WordLattice& w) {
  std::vector<std::string> issues;
  if (w.num_nodes < 2) issues.push_back("fewer than two nodes");
  if (w.edges.empty()) issues.push_back("no edges");
  if (!issues.empty()) return issues;
  std::vector<int> indeg(static_cast<std::size_t>(w.num_nodes), 0), outdeg(static_cast<std::size_t>(w.num_nodes), 0);
  std::set<int> ids;
  for (const auto& e : w.edges) {
    if (e.from < 0 || e.to >= w.num_nodes || e.from >= e.to) {
      issues.push_back("edge " + std::to_string(e.id) + " breaks topological numbering");
      return issues;
    }
    ++outdeg[static_cast<std::size_t>(e.from)];
    ++indeg[static_cast<std::size_t>(e.to)];
    if (!ids.insert(e.id).second) issues.push_back("duplicate edge id " + std::to_string(e.id));
  }
  for (int v = 0; v < w.num_nodes; ++v) {
    bool src = indeg[static_cast<std::size_t>(v)] == 0, snk = outdeg[static_cast<std::size_t>(v)] == 0;
    if (src && v != w.source()) issues.push_back("extra source node " + std::to_string(v));
    if (snk && v != w.sink()) issues.push_back("extra sink node " + std::to_string(v));
  }
  auto fwd = reachable_from(w, w.source());
  auto bwd = reaching(w, w.sink());
  for (const auto& e : w.edges)
    if (!fwd[static_cast<std::size_t>(e.from)] || !bwd[static_cast<std::size_t>(e.to)])
      issues.push_back("edge " + std::to_string(e.id) + " lies on no source-sink path");
  return issues;
}

namespace detail {

/// Parallel chain spanning original positions [from, to) of the question.
struct Insertion {
  int from;
  int to;
  Tokens tokens;
  Origin origin;
};

// Lays out the question chain plus insertions, numbering nodes so that
// chain-internal nodes sit between their span's boundary nodes.
inline WordLattice layout(const Tokens& question, std::vector<Insertion> inserts) {
  const int n = static_cast<int>(question.size());
  std::sort(inserts.begin(), inserts.end(), [](const Insertion& a, const Insertion& b) {
    return std::tie(a.from, a.to, a.origin, a.tokens) < std::tie(b.from, b.to, b.origin, b.tokens);
  });
  inserts.erase(std::unique(inserts.begin(), inserts.end(),
                            [](const Insertion& a, const Insertion& b) {
                              return a.from == b.from && a.to == b.to && a.tokens == b.tokens;
                            }),
                inserts.end());

  // Node keys: original node i -> (i, 0); internal nodes -> (from, seq).
  std::vector<std::pair<int, int>> keys;
  for (int i = 0; i <= n; ++i) keys.emplace_back(i, 0);
  struct RawEdge {
    std::pair<int, int> from, to;
    std::string token;
    Origin origin;
  };
  std::vector<RawEdge> raw;
  for (int i = 0; i < n; ++i) raw.push_back({{i, 0}, {i + 1, 0}, question[static_cast<std::size_t>(i)], Origin::Input});
  std::map<int, int> seq;
  for (const auto& ins : inserts) {
    std::pair<int, int> prev{ins.from, 0};
    for (std::size_t t = 0; t < ins.tokens.size(); ++t) {
      std::pair<int, int> next{ins.to, 0};
      if (t + 1 < ins.tokens.size()) {
        next = {ins.from, ++seq[ins.from]};
        keys.push_back(next);
      }
      raw.push_back({prev, next, ins.tokens[t], ins.origin});
      prev = next;
    }
  }
  std::sort(keys.begin(), keys.end());
  std::map<std::pair<int, int>, int> id;
  for (std::size_t i = 0; i < keys.size(); ++i) id[keys[i]] = static_cast<int>(i);

  WordLattice w;
  w.num_nodes = static_cast<int>(keys.size());
  for (const auto& r : raw) w.edges.push_back({id[r.from], id[r.to], r.token, r.origin, 0});
  std::sort(w.edges.begin(), w.edges.end(), [](const LatticeEdge& a, const LatticeEdge& b) {
    return std::tie(a.from, a.to, a.origin, a.token) < std::tie(b.from, b.to, b.origin, b.token);
  });
  for (std::size_t i = 0; i < w.edges.size(); ++i) w.edges[i].id = static_cast<int>(i);
  return w;
}

}  // namespace detail

inline WordLattice build_naive(const Tokens& question) {
  if (question.empty()) throw Error(Errc::EmptyQuestion, "question has no tokens");
  return detail::layout(question, {});
}

struct ParaphraseRule {
  Tokens source;
  Tokens target;
  double score = 0.0;
};

/// Lexical and phrasal rewrites, stored lowercased, without identity rewrites.
struct ParaphraseRuleDB {
  std::vector<ParaphraseRule> rules;
};

/// "source phrase<TAB>target phrase<TAB>score"; entries scoring below
/// `min_score` are dropped. Duplicate pairs keep their best score.
inline ParaphraseRuleDB load_rule_db(const std::filesystem::path& path,
                                     double min_score = -std::numeric_limits<double>::infinity()) {
  constexpr auto E = Errc::MalformedInput;
  std::map<std::pair<Tokens, Tokens>, double> best;
  std::size_t lineno = 0;
  for (const auto& line : read_lines(path)) {
    ++lineno;
    if (trim(line).empty() || trim(line).front() == '#') continue;
    auto f = split(line, '\t');
    if (f.size() != 3) throw Error(E, path.string() + ":" + std::to_string(lineno) + ": expected 3 fields");
    Tokens src = lower_all(split_ws(f[0])), tgt = lower_all(split_ws(f[1]));
    if (src.empty() || tgt.empty()) throw Error(E, path.string() + ":" + std::to_string(lineno) + ": empty phrase");
    double score = parse_double(trim(f[2]), E);
    if (src == tgt || score < min_score) continue;
    auto [it, fresh] = best.emplace(std::pair{src, tgt}, score);
    if (!fresh) it->second = std::max(it->second, score);
  }
  ParaphraseRuleDB db;
  for (const auto& [k, s] : best) db.rules.push_back({k.first, k.second, s});
  return db;
}

/// Adds a parallel path for every rule whose source phrase matches a
/// contiguous span (case-insensitive). Overlapping matches all contribute.
inline WordLattice build_from_rules(const Tokens& question, const ParaphraseRuleDB& db) {
  if (question.empty()) throw Error(Errc::EmptyQuestion, "question has no tokens");
  Tokens low = lower_all(question);
  std::vector<detail::Insertion> inserts;
  for (const auto& r : db.rules) {
    const auto len = r.source.size();
    if (len == 0 || r.target.empty() || len > low.size()) continue;
    for (std::size_t i = 0; i + len <= low.size(); ++i) {
      if (!std::equal(r.source.begin(), r.source.end(), low.begin() + static_cast<std::ptrdiff_t>(i))) continue;
      if (std::equal(r.target.begin(), r.target.end(), low.begin() + static_cast<std::ptrdiff_t>(i),
                     low.begin() + static_cast<std::ptrdiff_t>(i + len)))
        continue;
      inserts.push_back({static_cast<int>(i), static_cast<int>(i + len), r.target, Origin::Rule});
    }
  }
  return detail::layout(question, std::move(inserts));
}

/// Parses the question with a two-layer grammar; for every lexical node
/// X-h1-h2 over word w, each word w' != w that X rewrites to under any
/// syntactic state with semantic state h2 becomes a parallel edge.
inline WordLattice build_bilayered(const Tokens& question, const LatentGrammar& g,
                                   const ParseOptions& opt = {true, 1e-12}) {
  if (question.empty()) throw Error(Errc::EmptyQuestion, "question has no tokens");
  if (g.layers.layers != 2) throw Error(Errc::MalformedInput, "bi-layered lattices need a two-layer grammar");
  DerivationTree d = cky_viterbi(question, g, opt);

  // Leaves in left-to-right order match token positions.
  std::vector<const DerivationNode*> leaves;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    int id = stack.back();
    stack.pop_back();
    const auto& n = d.nodes[static_cast<std::size_t>(id)];
    if (n.is_lexical()) {
      leaves.push_back(&n);
    } else {
      stack.push_back(n.right);
      stack.push_back(n.left);
    }
  }

  std::vector<detail::Insertion> inserts;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    const auto& leaf = *leaves[i];
    const std::string& w = question[i];
    std::set<std::string> alts;
    for (const auto& r : g.lexical) {
      if (r.parent != leaf.symbol || r.parent_state.sem != leaf.state.sem) continue;
      const auto& w2 = g.words.name(r.word);
      if (w2 != w && w2 != to_lower(w)) alts.insert(w2);
    }
    for (const auto& a : alts)
      inserts.push_back({static_cast<int>(i), static_cast<int>(i + 1), Tokens{a}, Origin::Bilayered});
  }
  return detail::layout(question, std::move(inserts));
}

/// Keeps only edges that share at least one source-sink path with edge
/// `edge_id`; nodes left without edges are dropped and the rest renumbered
/// in order.
inline WordLattice remove_conflicting(const WordLattice& w, int edge_id) {
  const LatticeEdge* e = w.find_edge(edge_id);
  if (!e) throw Error(Errc::EdgeNotInLattice, "edge " + std::to_string(edge_id));
  auto after = reachable_from(w, e->to);
  auto before = reaching(w, e->from);
  std::vector<LatticeEdge> kept;
  for (const auto& f : w.edges) {
    if (f.id == e->id || before[static_cast<std::size_t>(f.to)] || after[static_cast<std::size_t>(f.from)])
      kept.push_back(f);
  }
  std::vector<int> used(static_cast<std::size_t>(w.num_nodes), 0);
  for (const auto& f : kept) used[static_cast<std::size_t>(f.from)] = used[static_cast<std::size_t>(f.to)] = 1;
  std::vector<int> remap(static_cast<std::size_t>(w.num_nodes), -1);
  int next = 0;
  for (int v = 0; v < w.num_nodes; ++v)
    if (used[static_cast<std::size_t>(v)]) remap[static_cast<std::size_t>(v)] = next++;
  WordLattice out;
  out.num_nodes = next;
  for (auto f : kept) {
    f.from = remap[static_cast<std::size_t>(f.from)];
    f.to = remap[static_cast<std::size_t>(f.to)];
    out.edges.push_back(std::move(f));
  }
  return out;
}

/// Up to `cap` source-sink paths as edge-id sequences, depth-first in edge
/// order.
inline std::vector<std::vector<int>> enumerate_edge_paths(const WordLattice& w, std::size_t cap) {
  std::vector<std::vector<const LatticeEdge*>> out_edges(static_cast<std::size_t>(w.num_nodes));
  for (const auto& e : w.edges) out_edges[static_cast<std::size_t>(e.from)].push_back(&e);
  std::vector<std::vector<int>> paths;
  std::vector<int> cur;
  auto dfs = [&](auto&& self, int v) -> void {
    if (paths.size() >= cap) return;
    if (v == w.sink()) {
      paths.push_back(cur);
      return;
    }
    for (const auto* e : out_edges[static_cast<std::size_t>(v)]) {
      cur.push_back(e->id);
      self(self, e->to);
      cur.pop_back();
      if (paths.size() >= cap) return;
    }
  };
  if (w.num_nodes > 0 && cap > 0) dfs(dfs, w.source());
  return paths;
}

inline std::vector<Tokens> enumerate_paths(const WordLattice& w, std::size_t cap) {
  std::vector<Tokens> out;
  for (const auto& p : enumerate_edge_paths(w, cap)) {
    Tokens t;
    for (int id : p) t.push_back(w.find_edge(id)->token);
    out.push_back(std::move(t));
  }
  return out;
}

/// True iff one source-sink path of `w` contains every edge in `ids`.
inline bool on_single_path(const WordLattice& w, std::vector<int> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::vector<const LatticeEdge*> es;
  for (int id : ids) {
    const auto* e = w.find_edge(id);
    if (!e) return false;
    es.push_back(e);
  }
  std::sort(es.begin(), es.end(), [](auto* a, auto* b) { return std::tie(a->from, a->to) < std::tie(b->from, b->to); });
  for (std::size_t i = 1; i < es.size(); ++i) {
    if (es[i]->from < es[i - 1]->to) return false;
    if (!reachable_from(w, es[i - 1]->to)[static_cast<std::size_t>(es[i]->from)]) return false;
  }
  return true;
}

/// "NODE i" lines then "EDGE from to token origin" lines.
inline std::string dump(const WordLattice& w) {
  std::string out;
  for (int v = 0; v < w.num_nodes; ++v) out += "NODE " + std::to_string(v) + "\n";
  auto edges = w.edges;
  std::sort(edges.begin(), edges.end(), [](const LatticeEdge& a, const LatticeEdge& b) {
    return std::tie(a.from, a.to, a.origin, a.token, a.id) < std::tie(b.from, b.to, b.origin, b.token, b.id);
  });
  for (const auto& e : edges)
    out += "EDGE " + std::to_string(e.from) + " " + std::to_string(e.to) + " " + e.token + " " +
           origin_name(e.origin) + "\n";
  return out;
}

inline WordLattice parse_lattice(std::string_view text) {
  constexpr auto E = Errc::MalformedInput;
  WordLattice w;
  for (const auto& line : split(text, '\n')) {
    auto f = split_ws(line);
    if (f.empty()) continue;
    if (f[0] == "NODE" && f.size() == 2) {
      w.num_nodes = std::max(w.num_nodes, static_cast<int>(parse_int(f[1], E)) + 1);
    } else if (f[0] == "EDGE" && f.size() == 5) {
      w.edges.push_back({static_cast<int>(parse_int(f[1], E)), static_cast<int>(parse_int(f[2], E)), f[3],
                         parse_origin(f[4]), static_cast<int>(w.edges.size())});
    } else {
      throw Error(E, "bad lattice line '" + line + "'");
    }
  }
  return w;
}

}  // namespace lpgen
