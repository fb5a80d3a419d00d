#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "lpgen/error.hpp"
#include "lpgen/grammar.hpp"
#include "lpgen/treebank.hpp"
#include "lpgen/util.hpp"

namespace lpgen {

enum class Layer { Syntactic, Semantic };

/// Sparse feature map. std::map keeps iteration (and thus clustering) order
/// independent of insertion order.
using FeatureVector = std::map<std::string, double>;

/// Word alignment between two questions of the treebank, identified by their
/// 0-based position in the treebank file.
struct AlignmentRecord {
  std::size_t question_a = 0;
  std::size_t question_b = 0;
  std::vector<std::pair<int, int>> pairs;
};

/// "qidA<TAB>qidB<TAB>i-j[,i-j...]"
inline std::vector<AlignmentRecord> read_alignments(const std::filesystem::path& path) {
  constexpr auto E = Errc::MalformedInput;
  std::vector<AlignmentRecord> out;
  std::size_t lineno = 0;
  for (const auto& line : read_lines(path)) {
    ++lineno;
    if (trim(line).empty() || trim(line).front() == '#') continue;
    auto f = split(line, '\t');
    if (f.size() != 3) throw Error(E, path.string() + ":" + std::to_string(lineno) + ": expected 3 fields");
    AlignmentRecord r;
    r.question_a = static_cast<std::size_t>(parse_int(f[0], E));
    r.question_b = static_cast<std::size_t>(parse_int(f[1], E));
    for (const auto& p : split(trim(f[2]), ',')) {
      if (p.empty()) continue;
      auto ij = split(p, '-');
      if (ij.size() != 2) throw Error(E, "bad alignment pair '" + p + "'");
      r.pairs.emplace_back(static_cast<int>(parse_int(ij[0], E)), static_cast<int>(parse_int(ij[1], E)));
    }
    out.push_back(std::move(r));
  }
  return out;
}

/// For every question and token position, the words aligned to it in any
/// paraphrase pair.
using AlignmentIndex = std::vector<std::vector<std::set<std::string>>>;

inline AlignmentIndex build_alignment_index(const std::vector<BinaryTree>& trees,
                                            const std::vector<AlignmentRecord>& records) {
  std::vector<Tokens> yields;
  yields.reserve(trees.size());
  for (const auto& t : trees) yields.push_back(t.yield());
  AlignmentIndex idx(trees.size());
  for (std::size_t q = 0; q < trees.size(); ++q) idx[q].resize(yields[q].size());
  for (const auto& r : records) {
    if (r.question_a >= trees.size() || r.question_b >= trees.size())
      throw Error(Errc::MalformedInput, "alignment references unknown question");
    const auto& ya = yields[r.question_a];
    const auto& yb = yields[r.question_b];
    for (auto [i, j] : r.pairs) {
      if (i < 0 || j < 0 || static_cast<std::size_t>(i) >= ya.size() || static_cast<std::size_t>(j) >= yb.size())
        throw Error(Errc::MalformedInput, "alignment index out of range for questions " +
                                              std::to_string(r.question_a) + "/" + std::to_string(r.question_b));
      idx[r.question_a][i].insert(yb[j]);
      idx[r.question_b][j].insert(ya[i]);
    }
  }
  return idx;
}

inline std::string length_bucket(int len) {
  if (len <= 1) return "1";
  if (len == 2) return "2";
  if (len <= 5) return "3-5";
  return "6+";
}

/// Syntactic layer: inside rule signature, first/last inside terminal,
/// parent and sibling labels, span-length bucket. Semantic layer: the set of
/// inside-yield words plus every word aligned to them.
inline FeatureVector extract_features(const BinaryTree& t, NodeId node, Layer layer,
                                      const AlignmentIndex* alignments = nullptr, std::size_t tree_id = 0) {
  if (!t.contains(node)) throw Error(Errc::NodeNotInTree, "node " + std::to_string(node));
  const auto& n = t[node];
  FeatureVector fv;
  if (layer == Layer::Semantic) {
    if (!alignments) throw Error(Errc::MissingAlignments, "semantic features need paraphrase alignments");
    if (tree_id >= alignments->size()) throw Error(Errc::MissingAlignments, "no alignment entry for tree");
    const auto& aligned = (*alignments)[tree_id];
    Tokens y = t.yield();
    for (int i = n.begin; i < n.end; ++i) {
      fv["w=" + y[i]] = 1.0;
      if (static_cast<std::size_t>(i) < aligned.size())
        for (const auto& w : aligned[i]) fv["w=" + w] = 1.0;
    }
    return fv;
  }

  if (n.is_preterminal()) {
    fv["rule=" + n.label + "\xE2\x86\x92" + n.word] = 1.0;
  } else {
    fv["rule=" + n.label + "\xE2\x86\x92" + t[n.left].label + " " + t[n.right].label] = 1.0;
  }
  Tokens y = t.yield();
  fv["first=" + y[n.begin]] = 1.0;
  fv["last=" + y[n.end - 1]] = 1.0;
  if (n.parent == kNoNode) {
    fv["parent=TOP"] = 1.0;
    fv["sibling=none"] = 1.0;
  } else {
    const auto& p = t[n.parent];
    fv["parent=" + p.label] = 1.0;
    NodeId sib = p.left == node ? p.right : p.left;
    fv["sibling=" + t[sib].label] = 1.0;
  }
  fv["len=" + length_bucket(n.end - n.begin)] = 1.0;
  return fv;
}

/// Cluster index per (tree, node) for one layer; -1 marks an unassigned node.
struct StateAssignment {
  int m = 1;
  std::vector<std::vector<std::int32_t>> states;

  void set(std::size_t tree, NodeId node, std::int32_t s) {
    if (states.size() <= tree) states.resize(tree + 1);
    auto& v = states[tree];
    if (v.size() <= static_cast<std::size_t>(node)) v.resize(static_cast<std::size_t>(node) + 1, -1);
    v[static_cast<std::size_t>(node)] = s;
  }
  std::int32_t get(std::size_t tree, NodeId node) const {
    if (tree >= states.size() || node < 0 || static_cast<std::size_t>(node) >= states[tree].size()) return -1;
    return states[tree][static_cast<std::size_t>(node)];
  }
};

struct KeyedVector {
  std::size_t tree = 0;
  NodeId node = kNoNode;
  std::string symbol;
  FeatureVector features;
};

namespace detail {

inline std::string canonical_key(const FeatureVector& fv) {
  std::string key;
  for (const auto& [k, v] : fv) {
    key += k;
    key += '\x1f';
    key += format_double(v);
    key += '\x1e';
  }
  return key;
}

struct SparsePoint {
  std::vector<std::pair<std::uint32_t, double>> entries;  // L2-normalized tf-idf
  double weight = 1.0;  // multiplicity
};

inline double sq_dist(const SparsePoint& x, const std::vector<double>& c, double c_norm2) {
  double dot = 0.0, x2 = 0.0;
  for (auto [j, v] : x.entries) {
    dot += v * c[j];
    x2 += v * v;
  }
  return x2 - 2.0 * dot + c_norm2;
}

// Weighted k-means with k-means++ seeding; returns a cluster per point,
// relabeled by first occurrence.
inline std::vector<std::int32_t> kmeans(const std::vector<SparsePoint>& pts, std::size_t dim, int k,
                                        std::uint64_t seed, int max_iter = 50) {
  const std::size_t n = pts.size();
  std::vector<std::int32_t> assign(n, 0);
  if (k <= 1 || n <= 1) return assign;
  if (static_cast<std::size_t>(k) >= n) {
    for (std::size_t i = 0; i < n; ++i) assign[i] = static_cast<std::int32_t>(i);
    return assign;
  }
  Rng rng(seed);
  auto dense = [&](const SparsePoint& p) {
    std::vector<double> c(dim, 0.0);
    for (auto [j, v] : p.entries) c[j] = v;
    return c;
  };
  auto norm2 = [](const std::vector<double>& c) {
    double s = 0.0;
    for (double v : c) s += v * v;
    return s;
  };

  std::vector<std::vector<double>> centers;
  std::vector<double> cnorm;
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = pts[i].weight;
  std::size_t first = draw_weighted(rng, w);
  centers.push_back(dense(pts[first]));
  cnorm.push_back(norm2(centers.back()));
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  while (static_cast<int>(centers.size()) < k) {
    for (std::size_t i = 0; i < n; ++i)
      best[i] = std::min(best[i], std::max(0.0, sq_dist(pts[i], centers.back(), cnorm.back())));
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = pts[i].weight * best[i];
    std::size_t pick = draw_weighted(rng, d2);
    if (pick >= n) break;  // all remaining points coincide with a center
    centers.push_back(dense(pts[pick]));
    cnorm.push_back(norm2(centers.back()));
  }
  const std::size_t kk = centers.size();

  std::vector<std::int32_t> prev(n, -1);
  for (int it = 0; it < max_iter; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      double bd = std::numeric_limits<double>::infinity();
      std::int32_t bc = 0;
      for (std::size_t c = 0; c < kk; ++c) {
        double d = sq_dist(pts[i], centers[c], cnorm[c]);
        if (d < bd) {
          bd = d;
          bc = static_cast<std::int32_t>(c);
        }
      }
      assign[i] = bc;
    }
    if (assign == prev) break;
    prev = assign;
    std::vector<std::vector<double>> sums(kk, std::vector<double>(dim, 0.0));
    std::vector<double> mass(kk, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto c = static_cast<std::size_t>(assign[i]);
      mass[c] += pts[i].weight;
      for (auto [j, v] : pts[i].entries) sums[c][j] += pts[i].weight * v;
    }
    for (std::size_t c = 0; c < kk; ++c) {
      if (mass[c] <= 0.0) continue;  // empty cluster keeps its center
      for (auto& v : sums[c]) v /= mass[c];
      centers[c] = std::move(sums[c]);
      cnorm[c] = norm2(centers[c]);
    }
  }

  std::map<std::int32_t, std::int32_t> relabel;
  for (auto& a : assign) {
    auto it = relabel.find(a);
    if (it == relabel.end()) it = relabel.emplace(a, static_cast<std::int32_t>(relabel.size())).first;
    a = it->second;
  }
  return assign;
}

}  // namespace detail

/// Per-symbol k-means over tf-idf weighted, L2-normalized vectors. Identical
/// vectors are merged before clustering and points are processed in a
/// canonical order, so the result does not depend on input order.
inline StateAssignment cluster_states(const std::vector<KeyedVector>& vectors, int m, std::uint64_t seed) {
  if (m < 1) throw Error(Errc::MalformedInput, "state count must be >= 1");
  StateAssignment out;
  out.m = m;
  std::map<std::string, std::vector<std::size_t>> by_symbol;
  for (std::size_t i = 0; i < vectors.size(); ++i) by_symbol[vectors[i].symbol].push_back(i);

  for (const auto& [symbol, members] : by_symbol) {
    std::map<std::string, std::size_t> distinct;  // canonical key -> distinct index
    std::vector<const FeatureVector*> reps;
    std::vector<double> mult;
    std::vector<std::size_t> member_distinct(members.size());
    {
      std::map<std::string, std::pair<const FeatureVector*, double>> tmp;
      for (std::size_t i : members) {
        auto& e = tmp[detail::canonical_key(vectors[i].features)];
        e.first = &vectors[i].features;
        e.second += 1.0;
      }
      for (auto& [key, e] : tmp) {
        distinct.emplace(key, reps.size());
        reps.push_back(e.first);
        mult.push_back(e.second);
      }
      for (std::size_t k = 0; k < members.size(); ++k)
        member_distinct[k] = distinct.at(detail::canonical_key(vectors[members[k]].features));
    }

    std::map<std::string, std::uint32_t> feat_index;
    std::map<std::string, double> df;
    for (std::size_t d = 0; d < reps.size(); ++d)
      for (const auto& [f, v] : *reps[d]) {
        feat_index.emplace(f, 0);
        if (v != 0.0) df[f] += mult[d];
      }
    std::uint32_t next = 0;
    for (auto& [f, idx] : feat_index) idx = next++;
    const double total = static_cast<double>(members.size());

    std::vector<detail::SparsePoint> pts(reps.size());
    for (std::size_t d = 0; d < reps.size(); ++d) {
      double norm = 0.0;
      for (const auto& [f, v] : *reps[d]) {
        double idf = std::log((1.0 + total) / (1.0 + df[f])) + 1.0;
        double x = v * idf;
        pts[d].entries.emplace_back(feat_index[f], x);
        norm += x * x;
      }
      norm = std::sqrt(norm);
      if (norm > 0.0)
        for (auto& e : pts[d].entries) e.second /= norm;
      pts[d].weight = mult[d];
    }

    int k = std::min<int>(m, static_cast<int>(pts.size()));
    auto clusters = detail::kmeans(pts, feat_index.size(), k, derive_seed(seed, symbol));
    for (std::size_t i = 0; i < members.size(); ++i) {
      const auto& kv = vectors[members[i]];
      out.set(kv.tree, kv.node, clusters[member_distinct[i]]);
    }
  }
  return out;
}

/// Extracts features for every eligible node and clusters them. The
/// semantic layer skips "@" intermediates, which inherit their parent's state.
inline StateAssignment assign_states(const std::vector<BinaryTree>& trees, Layer layer, int m, std::uint64_t seed,
                                     const AlignmentIndex* alignments = nullptr) {
  std::vector<KeyedVector> vecs;
  for (std::size_t t = 0; t < trees.size(); ++t) {
    for (NodeId id = 0; static_cast<std::size_t>(id) < trees[t].size(); ++id) {
      const auto& n = trees[t][id];
      if (layer == Layer::Semantic && is_intermediate(n.label)) continue;
      vecs.push_back({t, id, n.label, extract_features(trees[t], id, layer, alignments, t)});
    }
  }
  auto tag = layer == Layer::Syntactic ? "syntactic" : "semantic";
  return cluster_states(vecs, m, derive_seed(seed, tag));
}

// ---------------------------------------------------------------------------
// Frequency-count MLE

/// Treebank whose nodes carry full latent states, plus the grammar estimated
/// from it.
struct AnnotatedTreebank {
  std::vector<BinaryTree> trees;
  std::vector<std::vector<State>> states;
  LatentGrammar grammar;
};

/// Bracketed tree with "label-h1[-h2]" node names.
inline std::string render_annotated(const BinaryTree& t, const std::vector<State>& states, int layers,
                                    NodeId id = 0) {
  const auto& n = t[id];
  std::string head = state_label(n.label, states[static_cast<std::size_t>(id)], layers);
  if (n.is_preterminal()) return "(" + head + " " + n.word + ")";
  return "(" + head + " " + render_annotated(t, states, layers, n.left) + " " +
         render_annotated(t, states, layers, n.right) + ")";
}

/// pi, t and q as relative frequencies over the annotated treebank. Counts
/// are integers, so the result is independent of accumulation order.
inline LatentGrammar estimate_from_states(const std::vector<BinaryTree>& trees,
                                          const std::vector<std::vector<State>>& states, LayerConfig layers) {
  if (trees.empty()) throw Error(Errc::EmptyTreebank, "no trees");
  using Ctx = std::pair<std::string, State>;
  std::map<Ctx, long long> root_counts, bin_parent, lex_parent;
  std::map<std::tuple<Ctx, Ctx, Ctx>, long long> bin_counts;
  std::map<std::pair<Ctx, std::string>, long long> lex_counts;
  std::map<std::string, bool> preterminal_label;

  for (std::size_t t = 0; t < trees.size(); ++t) {
    const auto& tree = trees[t];
    auto ctx = [&](NodeId id) { return Ctx{tree[id].label, states[t][static_cast<std::size_t>(id)]}; };
    ++root_counts[ctx(tree.root())];
    for (NodeId id = 0; static_cast<std::size_t>(id) < tree.size(); ++id) {
      const auto& n = tree[id];
      auto [it, fresh] = preterminal_label.emplace(n.label, n.is_preterminal());
      if (!fresh && it->second != n.is_preterminal())
        throw Error(Errc::SymbolClash, "'" + n.label + "' used as both preterminal and interminal");
      if (n.is_preterminal()) {
        ++lex_parent[ctx(id)];
        ++lex_counts[{ctx(id), n.word}];
      } else {
        ++bin_parent[ctx(id)];
        ++bin_counts[{ctx(id), ctx(n.left), ctx(n.right)}];
      }
    }
  }

  LatentGrammar g;
  g.layers = layers;
  const double ntrees = static_cast<double>(trees.size());
  for (const auto& [c, n] : root_counts) g.add_root(c.first, c.second, static_cast<double>(n) / ntrees);
  for (const auto& [key, n] : bin_counts) {
    const auto& [a, b, c] = key;
    g.add_binary(a.first, a.second, b.first, b.second, c.first, c.second,
                 static_cast<double>(n) / static_cast<double>(bin_parent.at(a)));
  }
  for (const auto& [key, n] : lex_counts)
    g.add_lexical(key.first.first, key.first.second, key.second,
                  static_cast<double>(n) / static_cast<double>(lex_parent.at(key.first)));
  g.finalize();
  return g;
}

inline std::vector<std::vector<State>> states_from_assignment(const std::vector<BinaryTree>& trees,
                                                              const StateAssignment& syn,
                                                              const StateAssignment* sem) {
  std::vector<std::vector<State>> out(trees.size());
  for (std::size_t t = 0; t < trees.size(); ++t) {
    const auto& tree = trees[t];
    out[t].resize(tree.size());
    for (NodeId id = 0; static_cast<std::size_t>(id) < tree.size(); ++id) {
      std::int32_t h1 = syn.get(t, id);
      if (h1 < 0 || h1 >= syn.m)
        throw Error(Errc::AssignmentMismatch, "syntactic state missing for tree " + std::to_string(t) + " node " +
                                                  std::to_string(id));
      auto& s = out[t][static_cast<std::size_t>(id)];
      s.syn = static_cast<std::uint32_t>(h1);
      if (!sem) continue;
      const auto& n = tree[id];
      if (is_intermediate(n.label)) {
        // Preorder: the parent is already filled in.
        s.sem = out[t][static_cast<std::size_t>(n.parent)].sem;
        continue;
      }
      std::int32_t h2 = sem->get(t, id);
      if (h2 < 0 || h2 >= sem->m)
        throw Error(Errc::AssignmentMismatch, "semantic state missing for tree " + std::to_string(t) + " node " +
                                                  std::to_string(id));
      s.sem = static_cast<std::uint32_t>(h2);
    }
  }
  return out;
}

inline LatentGrammar estimate_mle(const std::vector<BinaryTree>& trees, const StateAssignment& assignment) {
  if (trees.empty()) throw Error(Errc::EmptyTreebank, "no trees");
  return estimate_from_states(trees, states_from_assignment(trees, assignment, nullptr),
                              LayerConfig{1, assignment.m, 0});
}

/// Doubly annotated treebank (X-h1-h2 nodes) and the two-layer grammar
/// estimated over it.
inline AnnotatedTreebank annotate_bilayered(const std::vector<BinaryTree>& trees, const StateAssignment& syn,
                                            const StateAssignment& sem) {
  if (trees.empty()) throw Error(Errc::EmptyTreebank, "no trees");
  AnnotatedTreebank out;
  out.trees = trees;
  out.states = states_from_assignment(trees, syn, &sem);
  out.grammar = estimate_from_states(trees, out.states, LayerConfig{2, syn.m, sem.m});
  return out;
}

inline std::vector<BinaryTree> binarize_all(const std::vector<Tree>& trees) {
  std::vector<BinaryTree> out;
  out.reserve(trees.size());
  for (const auto& t : trees) out.push_back(binarize(t));
  return out;
}

/// Syntactic-layer grammar: binarize, cluster, estimate.
inline LatentGrammar train_grammar(const std::vector<Tree>& treebank, int m, std::uint64_t seed) {
  if (treebank.empty()) throw Error(Errc::EmptyTreebank, "no trees");
  auto trees = binarize_all(treebank);
  auto syn = assign_states(trees, Layer::Syntactic, m, seed);
  return estimate_mle(trees, syn);
}

inline AnnotatedTreebank train_bilayered(const std::vector<Tree>& treebank,
                                         const std::vector<AlignmentRecord>& alignments, int m1, int m2,
                                         std::uint64_t seed) {
  if (treebank.empty()) throw Error(Errc::EmptyTreebank, "no trees");
  if (alignments.empty()) throw Error(Errc::MissingAlignments, "bi-layered training needs paraphrase alignments");
  auto trees = binarize_all(treebank);
  auto index = build_alignment_index(trees, alignments);
  auto syn = assign_states(trees, Layer::Syntactic, m1, seed);
  auto sem = assign_states(trees, Layer::Semantic, m2, seed, &index);
  return annotate_bilayered(trees, syn, sem);
}

}  // namespace lpgen
