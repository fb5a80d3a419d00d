#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "lpgen/error.hpp"
#include "lpgen/util.hpp"

namespace lpgen {

// ---------------------------------------------------------------------------
// Knowledge base

struct Triple {
  std::string subject;
  std::string relation;
  std::string object;

  auto operator<=>(const Triple&) const = default;
};

class KnowledgeGraph {
 public:
  void add_triple(const std::string& s, const std::string& r, const std::string& o) {
    if (!triples_.insert({s, r, o}).second) return;
    entities_.insert(s);
    entities_.insert(o);
    relations_.insert(r);
    objects_[{s, r}].insert(o);
    subjects_[{r, o}].insert(s);
    subjects_of_rel_[r].insert(s);
    objects_of_rel_[r].insert(o);
  }
  void add_type(const std::string& e, const std::string& t) {
    entities_.insert(e);
    types_.insert(t);
    members_[t].insert(e);
  }

  const std::set<std::string>& entities() const { return entities_; }
  const std::set<std::string>& relations() const { return relations_; }
  const std::set<std::string>& types() const { return types_; }
  const std::set<Triple>& triples() const { return triples_; }

  bool has(const std::string& s, const std::string& r, const std::string& o) const {
    return triples_.count({s, r, o}) != 0;
  }
  const std::set<std::string>& objects(const std::string& s, const std::string& r) const {
    return get(objects_, {s, r});
  }
  const std::set<std::string>& subjects(const std::string& r, const std::string& o) const {
    return get(subjects_, {r, o});
  }
  bool has_subject(const std::string& r, const std::string& s) const { return get(subjects_of_rel_, r).count(s) != 0; }
  bool has_object(const std::string& r, const std::string& o) const { return get(objects_of_rel_, r).count(o) != 0; }
  const std::set<std::string>& members(const std::string& t) const { return get(members_, t); }
  bool is_a(const std::string& e, const std::string& t) const { return members(t).count(e) != 0; }

 private:
  template <class K>
  static const std::set<std::string>& get(const std::map<K, std::set<std::string>>& m, const K& k) {
    static const std::set<std::string> empty;
    auto it = m.find(k);
    return it == m.end() ? empty : it->second;
  }

  std::set<Triple> triples_;
  std::set<std::string> entities_, relations_, types_;
  std::map<std::pair<std::string, std::string>, std::set<std::string>> objects_, subjects_;
  std::map<std::string, std::set<std::string>> subjects_of_rel_, objects_of_rel_, members_;
};

/// "subj<TAB>rel<TAB>obj" triples and "TYPE<TAB>entity<TAB>type" lines.
inline KnowledgeGraph load_kb(const std::filesystem::path& path) {
  KnowledgeGraph kb;
  std::size_t lineno = 0;
  for (const auto& line : read_lines(path)) {
    ++lineno;
    if (trim(line).empty() || trim(line).front() == '#') continue;
    auto f = split(line, '\t');
    if (f.size() != 3) throw Error(Errc::MalformedInput, path.string() + ":" + std::to_string(lineno) + ": expected 3 fields");
    if (f[0] == "TYPE") kb.add_type(f[1], f[2]);
    else kb.add_triple(f[0], f[1], f[2]);
  }
  return kb;
}

/// Surface form -> ranked KB entity ids. File lines: "surface<TAB>entity";
/// rank is the order of appearance among lines with the same surface form.
class EntityDictionary {
 public:
  void add(std::string_view surface, std::string entity) {
    entries_[to_lower(join(split_ws(surface)))].push_back(std::move(entity));
  }
  const std::vector<std::string>& lookup(std::string_view surface) const {
    static const std::vector<std::string> empty;
    auto it = entries_.find(to_lower(join(split_ws(surface))));
    return it == entries_.end() ? empty : it->second;
  }

 private:
  std::map<std::string, std::vector<std::string>> entries_;
};

inline EntityDictionary load_entity_dictionary(const std::filesystem::path& path) {
  EntityDictionary d;
  for (const auto& line : read_lines(path)) {
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto f = split(t, '\t');
    if (f.size() != 2) throw Error(Errc::MalformedInput, "entity dictionary lines need surface<TAB>entity");
    d.add(f[0], f[1]);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Ungrounded graphs

enum class NodeKind { Entity, Type, Event, Variable };

struct GraphNode {
  std::string id;
  NodeKind kind = NodeKind::Variable;
  std::string text;  // entity mention or unary predicate
};

struct GraphEdge {
  std::string event;
  std::string node;
  std::string label;
};

/// An event linking exactly two nodes: the unit that grounds to a relation.
struct RelationSlot {
  std::string event;
  int a = -1, b = -1;  // node indices
  std::string label_a, label_b;
};

struct UngroundedGraph {
  std::string paraphrase;
  double paraphrase_score = 1.0;
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;
  int target = -1;

  // Derived by finish().
  std::vector<RelationSlot> relations;
  std::vector<int> entity_nodes;
  std::vector<int> type_nodes;

  int index_of(const std::string& id) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i].id == id) return static_cast<int>(i);
    return -1;
  }

  /// Checks invariants and builds the decision slots.
  void finish() {
    constexpr auto E = Errc::MalformedInput;
    if (target < 0) throw Error(E, "graph has no TARGET");
    relations.clear();
    entity_nodes.clear();
    type_nodes.clear();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].kind == NodeKind::Entity) {
        if (trim(nodes[i].text).empty()) throw Error(E, "entity node " + nodes[i].id + " has no mention span");
        entity_nodes.push_back(static_cast<int>(i));
      }
      if (nodes[i].kind == NodeKind::Type) type_nodes.push_back(static_cast<int>(i));
    }
    std::map<std::string, std::vector<const GraphEdge*>> by_event;
    for (const auto& e : edges) {
      int ev = index_of(e.event), nd = index_of(e.node);
      if (ev < 0 || nodes[ev].kind != NodeKind::Event) throw Error(E, "edge references unknown event " + e.event);
      if (nd < 0 || nodes[nd].kind == NodeKind::Event) throw Error(E, "edge references bad node " + e.node);
      by_event[e.event].push_back(&e);
    }
    for (const auto& n : nodes) {
      if (n.kind != NodeKind::Event) continue;
      auto& es = by_event[n.id];
      if (es.size() != 2) throw Error(E, "event " + n.id + " must link exactly two nodes");
      relations.push_back({n.id, index_of(es[0]->node), index_of(es[1]->node), es[0]->label, es[1]->label});
    }
    // Connectivity over non-event nodes through events.
    std::vector<int> parent(nodes.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
    for (const auto& r : relations) parent[find(r.a)] = find(r.b);
    int root = -1;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].kind == NodeKind::Event) continue;
      int r = find(static_cast<int>(i));
      if (root < 0) root = r;
      else if (r != root) throw Error(E, "graph is not connected");
    }
  }
};

/// Node lines: "ENTITY id span...", "TYPE id label [target]", "EVENT id",
/// "TARGET id"; edge lines: "EDGE event node label". Optional
/// "PARAPHRASE text..." and "SCORE value" lines describe the source sentence.
inline UngroundedGraph parse_graph(std::string_view text) {
  constexpr auto E = Errc::MalformedInput;
  UngroundedGraph g;
  std::vector<std::string> pending_targets;
  for (const auto& line : split(text, '\n')) {
    auto f = split_ws(line);
    if (f.empty() || f[0].front() == '#') continue;
    const auto& kw = f[0];
    auto rest = [&](std::size_t from) { return join(Tokens(f.begin() + static_cast<std::ptrdiff_t>(from), f.end())); };
    if (kw == "ENTITY" && f.size() >= 3) {
      g.nodes.push_back({f[1], NodeKind::Entity, rest(2)});
    } else if (kw == "TYPE" && (f.size() == 3 || f.size() == 4)) {
      g.nodes.push_back({f[1], NodeKind::Type, f[2]});
      if (f.size() == 4) {
        if (f[3] != "target") throw Error(E, "TYPE flag must be 'target'");
        pending_targets.push_back(f[1]);
      }
    } else if (kw == "EVENT" && f.size() == 2) {
      g.nodes.push_back({f[1], NodeKind::Event, ""});
    } else if (kw == "TARGET" && f.size() == 2) {
      pending_targets.push_back(f[1]);
    } else if (kw == "EDGE" && f.size() == 4) {
      g.edges.push_back({f[1], f[2], f[3]});
    } else if (kw == "PARAPHRASE" && f.size() >= 2) {
      g.paraphrase = rest(1);
    } else if (kw == "SCORE" && f.size() == 2) {
      g.paraphrase_score = parse_double(f[1], E);
    } else {
      throw Error(E, "bad graph line '" + line + "'");
    }
  }
  std::set<std::string> ids;
  for (const auto& n : g.nodes)
    if (!ids.insert(n.id).second) throw Error(E, "duplicate node id " + n.id);
  std::sort(pending_targets.begin(), pending_targets.end());
  pending_targets.erase(std::unique(pending_targets.begin(), pending_targets.end()), pending_targets.end());
  if (pending_targets.size() != 1) throw Error(E, "graph must have exactly one TARGET");
  int t = g.index_of(pending_targets.front());
  if (t < 0) {
    g.nodes.push_back({pending_targets.front(), NodeKind::Variable, ""});
    t = static_cast<int>(g.nodes.size()) - 1;
  }
  if (g.nodes[t].kind == NodeKind::Entity || g.nodes[t].kind == NodeKind::Event)
    throw Error(E, "TARGET must be a variable or type node");
  g.target = t;
  g.finish();
  return g;
}

inline UngroundedGraph load_graph(const std::filesystem::path& path) {
  try {
    return parse_graph(read_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Grounded graphs

struct RelationGrounding {
  std::string relation;  // empty = null
  bool inverse = false;  // false: (a relation b); true: (b relation a)

  bool is_null() const { return relation.empty(); }
  auto operator<=>(const RelationGrounding&) const = default;
};

struct GroundedGraph {
  const UngroundedGraph* graph = nullptr;
  std::vector<std::string> entities;            // per graph.entity_nodes
  std::vector<RelationGrounding> relations;     // per graph.relations
  std::vector<std::string> types;               // per graph.type_nodes; empty = null
  double entity_score = 0.0;

  auto key() const { return std::tie(entities, relations, types); }
};

inline std::string describe(const GroundedGraph& g) {
  std::string out;
  const auto& u = *g.graph;
  for (std::size_t i = 0; i < g.entities.size(); ++i)
    out += u.nodes[u.entity_nodes[i]].id + "=" + g.entities[i] + " ";
  for (std::size_t i = 0; i < g.relations.size(); ++i)
    out += u.relations[i].event + "=" +
           (g.relations[i].is_null() ? "null" : g.relations[i].relation + (g.relations[i].inverse ? "^-1" : "")) + " ";
  for (std::size_t i = 0; i < g.types.size(); ++i)
    out += u.nodes[u.type_nodes[i]].id + ":" + (g.types[i].empty() ? "null" : g.types[i]) + " ";
  if (!out.empty()) out.pop_back();
  return out;
}

/// Entities reachable at TARGET when the grounded graph is executed as a
/// conjunctive query over its non-null constraints.
inline std::set<std::string> denotation(const GroundedGraph& g, const KnowledgeGraph& kb) {
  const auto& u = *g.graph;
  const int n = static_cast<int>(u.nodes.size());
  std::vector<std::string> fixed(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < u.entity_nodes.size(); ++i) fixed[u.entity_nodes[i]] = g.entities[i];

  struct Rel {
    int s, o;
    std::string r;
  };
  std::vector<Rel> rels;
  for (std::size_t i = 0; i < u.relations.size(); ++i) {
    const auto& rg = g.relations[i];
    if (rg.is_null()) continue;
    const auto& slot = u.relations[i];
    rels.push_back(rg.inverse ? Rel{slot.b, slot.a, rg.relation} : Rel{slot.a, slot.b, rg.relation});
  }
  std::vector<std::vector<std::string>> unary(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < u.type_nodes.size(); ++i)
    if (!g.types[i].empty()) unary[u.type_nodes[i]].push_back(g.types[i]);

  std::vector<char> constrained(static_cast<std::size_t>(n), 0);
  for (const auto& r : rels) constrained[r.s] = constrained[r.o] = 1;
  for (int v = 0; v < n; ++v)
    if (!unary[v].empty()) constrained[v] = 1;
  if (!constrained[u.target]) throw Error(Errc::UnboundTarget, "TARGET takes part in no grounded constraint");

  // Constants are entity nodes; everything else constrained is a variable.
  std::vector<int> vars;
  for (int v = 0; v < n; ++v)
    if (constrained[v] && u.nodes[v].kind != NodeKind::Entity) vars.push_back(v);

  std::vector<std::string> val = fixed;
  std::vector<char> bound(static_cast<std::size_t>(n), 0);
  for (int v = 0; v < n; ++v) bound[v] = u.nodes[v].kind == NodeKind::Entity;

  auto consistent = [&](int v) {
    for (const auto& t : unary[v])
      if (!kb.is_a(val[v], t)) return false;
    for (const auto& r : rels)
      if ((r.s == v || r.o == v) && bound[r.s] && bound[r.o] && !kb.has(val[r.s], r.r, val[r.o])) return false;
    return true;
  };
  // Entity constants must satisfy their own unary/binary constraints too.
  for (int v = 0; v < n; ++v)
    if (bound[v] && constrained[v] && !consistent(v)) return {};

  std::set<std::string> answers;
  std::vector<char> done(vars.size(), 0);
  std::function<void(std::size_t)> solve = [&](std::size_t depth) {
    if (depth == vars.size()) {
      answers.insert(val[u.target]);
      return;
    }
    // Prefer a variable linked to a bound node; candidates from the KB index.
    int pick = -1;
    const std::set<std::string>* cands = nullptr;
    for (std::size_t k = 0; k < vars.size() && !cands; ++k) {
      if (done[k]) continue;
      int v = vars[k];
      for (const auto& r : rels) {
        if (r.o == v && bound[r.s]) cands = &kb.objects(val[r.s], r.r);
        else if (r.s == v && bound[r.o]) cands = &kb.subjects(r.r, val[r.o]);
        if (cands) {
          pick = static_cast<int>(k);
          break;
        }
      }
      if (!cands && !unary[v].empty()) {
        cands = &kb.members(unary[v].front());
        pick = static_cast<int>(k);
      }
    }
    if (!cands) {
      for (std::size_t k = 0; k < vars.size(); ++k)
        if (!done[k]) {
          pick = static_cast<int>(k);
          break;
        }
      cands = &kb.entities();
    }
    int v = vars[static_cast<std::size_t>(pick)];
    done[static_cast<std::size_t>(pick)] = 1;
    bound[v] = 1;
    for (const auto& c : *cands) {
      val[v] = c;
      if (consistent(v)) solve(depth + 1);
    }
    bound[v] = 0;
    done[static_cast<std::size_t>(pick)] = 0;
  };
  solve(0);
  return answers;
}

inline double f1_score(const std::set<std::string>& predicted, const std::set<std::string>& gold) {
  if (predicted.empty() || gold.empty()) return 0.0;
  double inter = 0;
  for (const auto& p : predicted) inter += gold.count(p);
  if (inter == 0) return 0.0;
  double p = inter / static_cast<double>(predicted.size()), r = inter / static_cast<double>(gold.size());
  return 2 * p * r / (p + r);
}

inline double f1_loss(const std::set<std::string>& predicted, const std::set<std::string>& gold) {
  if (gold.empty()) throw Error(Errc::EmptyGold, "gold answer set is empty");
  return 1.0 - f1_score(predicted, gold);
}

// ---------------------------------------------------------------------------
// Features and model

using FeatureMap = std::map<std::string, double>;

inline double dot(const FeatureMap& w, const FeatureMap& phi) {
  double s = 0.0;
  for (const auto& [k, v] : phi) {
    auto it = w.find(k);
    if (it != w.end()) s += it->second * v;
  }
  return s;
}

namespace detail {

inline std::string stem(std::string w) {
  w = to_lower(w);
  if (w.size() > 4 && w.ends_with("ing")) w.resize(w.size() - 3);
  else if (w.size() > 3 && w.ends_with("ed")) w.resize(w.size() - 2);
  else if (w.size() > 3 && w.ends_with("s")) w.resize(w.size() - 1);
  if (w.size() > 5) w.resize(5);
  return w;
}

inline bool is_stopword(const std::string& w) {
  static const std::set<std::string> stop = {"the", "a", "an", "of", "in", "is", "are", "was", "do", "does",
                                             "did", "what", "which", "who", "where", "when", "?", "'s", "to",
                                             "by", "for", "on", "at", "arg1", "arg2", "arg3"};
  return stop.count(w) != 0;
}

/// Content stems of a dotted/underscored predicate or relation name.
inline std::set<std::string> name_stems(std::string_view name) {
  std::set<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (cur.size() > 1 && !is_stopword(to_lower(cur))) out.insert(stem(cur));
    cur.clear();
  };
  for (char c : name) {
    if (c == '.' || c == '_' || c == ' ' || c == ',') flush();
    else cur += c;
  }
  flush();
  return out;
}

inline int overlap(const std::set<std::string>& a, const std::set<std::string>& b) {
  int n = 0;
  for (const auto& x : a) n += static_cast<int>(b.count(x));
  return n;
}

}  // namespace detail

/// Features of a (paraphrase, ungrounded graph, grounding) tuple. Every
/// term is local to one decision, so partial groundings score additively.
inline FeatureMap tuple_features(const GroundedGraph& g) {
  const auto& u = *g.graph;
  FeatureMap phi;
  phi["entity_score"] = g.entity_score;
  phi["paraphrase_score"] = u.paraphrase_score;
  std::set<std::string> words;
  for (const auto& w : lower_all(split_ws(u.paraphrase)))
    if (!detail::is_stopword(w)) words.insert(w);
  for (int e : u.entity_nodes)
    for (const auto& w : lower_all(split_ws(u.nodes[e].text))) words.erase(w);

  for (std::size_t i = 0; i < g.relations.size(); ++i) {
    const auto& rg = g.relations[i];
    if (rg.is_null()) {
      phi["null_edge"] += 1.0;
      continue;
    }
    const auto& slot = u.relations[i];
    std::string rel = rg.relation + (rg.inverse ? "^-1" : "");
    phi["edge:" + slot.label_a + "," + slot.label_b + "->" + rel] += 1.0;
    auto nl = detail::name_stems(slot.label_a);
    for (const auto& s : detail::name_stems(slot.label_b)) nl.insert(s);
    phi["stem_overlap"] += detail::overlap(nl, detail::name_stems(rg.relation));
    for (const auto& w : words) phi["word:" + w + "->" + rg.relation] += 1.0;
  }
  for (std::size_t i = 0; i < g.types.size(); ++i) {
    if (g.types[i].empty()) {
      phi["null_type"] += 1.0;
      continue;
    }
    const auto& label = u.nodes[u.type_nodes[i]].text;
    phi["type:" + label + "->" + g.types[i]] += 1.0;
    phi["stem_overlap"] += detail::overlap(detail::name_stems(label), detail::name_stems(g.types[i]));
  }
  return phi;
}

/// Averaged structured perceptron state. `sum` accumulates the weight
/// vector after every training step; the averaged weights are sum / steps.
struct PerceptronModel {
  FeatureMap weights;
  FeatureMap sum;
  long long steps = 0;

  FeatureMap averaged() const {
    FeatureMap out;
    if (steps == 0) return weights;
    for (const auto& [k, v] : sum) out[k] = v / static_cast<double>(steps);
    return out;
  }
};

inline std::string serialize(const PerceptronModel& m) {
  std::string out = "STEPS\t" + std::to_string(m.steps) + "\n";
  for (const auto& [k, v] : m.weights) out += "WEIGHT\t" + k + "\t" + format_double(v) + "\n";
  for (const auto& [k, v] : m.sum) out += "SUM\t" + k + "\t" + format_double(v) + "\n";
  return out;
}

inline PerceptronModel deserialize_perceptron(std::string_view text) {
  constexpr auto E = Errc::MalformedInput;
  PerceptronModel m;
  for (const auto& line : split(text, '\n')) {
    if (line.empty()) continue;
    auto f = split(line, '\t');
    if (f[0] == "STEPS" && f.size() == 2) m.steps = parse_int(f[1], E);
    else if (f[0] == "WEIGHT" && f.size() == 3) m.weights[f[1]] = parse_double(f[2], E);
    else if (f[0] == "SUM" && f.size() == 3) m.sum[f[1]] = parse_double(f[2], E);
    else throw Error(E, "bad perceptron model line '" + line + "'");
  }
  return m;
}

// ---------------------------------------------------------------------------
// Grounding search

/// Joint entity assignment from the mention dictionary.
struct EntityAssignment {
  std::vector<std::string> entities;
  double score = 0.0;
};

inline constexpr std::size_t kEntityPaths = 10;

/// Each mention candidate scores (mention length in tokens) / (1 + rank);
/// joint assignments score the sum. The best kEntityPaths are kept, ties
/// broken lexicographically.
inline std::vector<EntityAssignment> entity_assignments(const UngroundedGraph& u, const EntityDictionary& dict) {
  std::vector<EntityAssignment> acc{{}};
  for (int e : u.entity_nodes) {
    const auto& mention = u.nodes[e].text;
    const auto& cands = dict.lookup(mention);
    if (cands.empty()) throw Error(Errc::NoEntityCandidates, "no KB entity for mention '" + mention + "'");
    double len = static_cast<double>(split_ws(mention).size());
    std::vector<EntityAssignment> next;
    for (const auto& a : acc)
      for (std::size_t r = 0; r < cands.size(); ++r) {
        auto b = a;
        b.entities.push_back(cands[r]);
        b.score += len / (1.0 + static_cast<double>(r));
        next.push_back(std::move(b));
      }
    acc = std::move(next);
  }
  std::sort(acc.begin(), acc.end(), [](const EntityAssignment& a, const EntityAssignment& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.entities < b.entities;
  });
  if (acc.size() > kEntityPaths) acc.resize(kEntityPaths);
  return acc;
}

/// Options for one relation slot: null, then every (relation, direction)
/// compatible with the slot's already-grounded entity endpoints.
inline std::vector<RelationGrounding> relation_options(const UngroundedGraph& u, std::size_t slot_index,
                                                       const std::vector<std::string>& entities,
                                                       const KnowledgeGraph& kb) {
  const auto& slot = u.relations[slot_index];
  auto entity_of = [&](int node) -> const std::string* {
    for (std::size_t i = 0; i < u.entity_nodes.size(); ++i)
      if (u.entity_nodes[i] == node) return &entities[i];
    return nullptr;
  };
  const std::string* ea = entity_of(slot.a);
  const std::string* eb = entity_of(slot.b);
  std::vector<RelationGrounding> out{{}};
  for (const auto& r : kb.relations()) {
    for (bool inv : {false, true}) {
      const std::string* subj = inv ? eb : ea;
      const std::string* obj = inv ? ea : eb;
      bool ok = true;
      if (subj && !kb.has_subject(r, *subj)) ok = false;
      if (obj && !kb.has_object(r, *obj)) ok = false;
      if (subj && obj && !kb.has(*subj, r, *obj)) ok = false;
      if (ok) out.push_back({r, inv});
    }
  }
  return out;
}

/// Options for a type slot: null, then every KB type.
inline std::vector<std::string> type_options(const KnowledgeGraph& kb) {
  std::vector<std::string> out{""};
  out.insert(out.end(), kb.types().begin(), kb.types().end());
  return out;
}

struct ScoredGrounding {
  GroundedGraph grounding;
  FeatureMap features;
  double score = 0.0;
};

inline bool better(const ScoredGrounding& a, const ScoredGrounding& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.grounding.key() < b.grounding.key();
}

inline std::size_t search_space_size(const UngroundedGraph& u, const KnowledgeGraph& kb,
                                     const EntityDictionary& dict) {
  std::size_t total = 0;
  for (const auto& a : entity_assignments(u, dict)) {
    std::size_t n = 1;
    for (std::size_t i = 0; i < u.relations.size(); ++i) n *= relation_options(u, i, a.entities, kb).size();
    for (std::size_t i = 0; i < u.type_nodes.size(); ++i) n *= type_options(kb).size();
    total += n;
  }
  return total;
}

/// Beam search over groundings: entity assignment first, then one decision
/// per relation slot (ground or skip), then per type node (ground or skip).
/// Returns the top `beam` complete groundings, best first.
inline std::vector<ScoredGrounding> ground(const UngroundedGraph& u, const KnowledgeGraph& kb,
                                           const EntityDictionary& dict, const FeatureMap& weights,
                                           std::size_t beam = 100) {
  if (beam == 0) beam = 1;
  auto score_of = [&](ScoredGrounding& s) {
    s.features = tuple_features(s.grounding);
    s.score = dot(weights, s.features);
  };
  auto prune = [&](std::vector<ScoredGrounding>& v) {
    std::sort(v.begin(), v.end(), better);
    if (v.size() > beam) v.resize(beam);
  };

  std::vector<ScoredGrounding> states;
  for (const auto& a : entity_assignments(u, dict)) {
    ScoredGrounding s;
    s.grounding.graph = &u;
    s.grounding.entities = a.entities;
    s.grounding.entity_score = a.score;
    score_of(s);
    states.push_back(std::move(s));
  }
  prune(states);
  for (std::size_t i = 0; i < u.relations.size(); ++i) {
    std::vector<ScoredGrounding> next;
    for (const auto& s : states)
      for (const auto& opt : relation_options(u, i, s.grounding.entities, kb)) {
        ScoredGrounding t = s;
        t.grounding.relations.push_back(opt);
        score_of(t);
        next.push_back(std::move(t));
      }
    states = std::move(next);
    prune(states);
  }
  const auto topts = type_options(kb);
  for (std::size_t i = 0; i < u.type_nodes.size(); ++i) {
    std::vector<ScoredGrounding> next;
    for (const auto& s : states)
      for (const auto& opt : topts) {
        ScoredGrounding t = s;
        t.grounding.types.push_back(opt);
        score_of(t);
        next.push_back(std::move(t));
      }
    states = std::move(next);
    prune(states);
  }
  return states;
}

/// (paraphrase graph, grounding) pair for one question.
struct TupleCandidate {
  std::size_t graph_index = 0;
  ScoredGrounding scored;
  std::set<std::string> answers;
  double loss = 1.0;
};

inline bool better(const TupleCandidate& a, const TupleCandidate& b) {
  if (a.scored.score != b.scored.score) return a.scored.score > b.scored.score;
  if (a.graph_index != b.graph_index) return a.graph_index < b.graph_index;
  return a.scored.grounding.key() < b.scored.grounding.key();
}

/// Denotation that treats an unbound TARGET as an empty answer.
inline std::set<std::string> safe_denotation(const GroundedGraph& g, const KnowledgeGraph& kb) {
  try {
    return denotation(g, kb);
  } catch (const Error& e) {
    if (e.code() == Errc::UnboundTarget) return {};
    throw;
  }
}

inline constexpr std::size_t kOracleBeam = 100000;

/// Every tuple with a non-empty denotation whose F1-loss against `gold` is
/// minimal among the groundings reachable with `big_beam`. Empty when no
/// grounding yields any correct answer.
inline std::vector<TupleCandidate> oracle_set(const std::vector<UngroundedGraph>& graphs, const KnowledgeGraph& kb,
                                              const EntityDictionary& dict, const std::set<std::string>& gold,
                                              std::size_t big_beam = kOracleBeam) {
  if (gold.empty()) throw Error(Errc::EmptyGold, "gold answer set is empty");
  std::vector<TupleCandidate> all;
  double best = 1.0;
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    std::vector<ScoredGrounding> found;
    try {
      found = ground(graphs[gi], kb, dict, {}, big_beam);
    } catch (const Error& e) {
      if (e.code() == Errc::NoEntityCandidates) continue;
      throw;
    }
    for (auto& s : found) {
      auto ans = safe_denotation(s.grounding, kb);
      if (ans.empty()) continue;
      double loss = f1_loss(ans, gold);
      best = std::min(best, loss);
      all.push_back({gi, std::move(s), std::move(ans), loss});
    }
  }
  std::vector<TupleCandidate> out;
  if (best >= 1.0) return out;
  for (auto& t : all)
    if (t.loss == best) out.push_back(std::move(t));
  return out;
}

/// Highest-scoring tuple across all graphs of a question under `weights`.
inline std::optional<TupleCandidate> predict(const std::vector<UngroundedGraph>& graphs, const KnowledgeGraph& kb,
                                             const EntityDictionary& dict, const FeatureMap& weights,
                                             std::size_t beam) {
  std::optional<TupleCandidate> best;
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    std::vector<ScoredGrounding> found;
    try {
      found = ground(graphs[gi], kb, dict, weights, beam);
    } catch (const Error& e) {
      if (e.code() == Errc::NoEntityCandidates) continue;
      throw;
    }
    if (found.empty()) continue;
    TupleCandidate c{gi, std::move(found.front()), {}, 1.0};
    if (!best || better(c, *best)) best = std::move(c);
  }
  return best;
}

// ---------------------------------------------------------------------------
// QA data, training, evaluation

struct QAExample {
  std::string question;
  std::vector<UngroundedGraph> graphs;  // graphs[0] is the original question's graph
  std::set<std::string> answers;
};

/// "question<TAB>graph-file[,graph-file...]<TAB>answer|answer...", graph
/// paths relative to the QA file.
inline std::vector<QAExample> load_qa(const std::filesystem::path& path) {
  std::vector<QAExample> out;
  std::size_t lineno = 0;
  for (const auto& line : read_lines(path)) {
    ++lineno;
    if (trim(line).empty() || trim(line).front() == '#') continue;
    auto f = split(line, '\t');
    if (f.size() != 3) throw Error(Errc::MalformedInput, path.string() + ":" + std::to_string(lineno) + ": expected 3 fields");
    QAExample ex;
    ex.question = f[0];
    for (const auto& gf : split(f[1], ',')) {
      if (trim(gf).empty()) continue;
      auto g = load_graph(path.parent_path() / std::string(trim(gf)));
      if (g.paraphrase.empty()) g.paraphrase = ex.question;
      ex.graphs.push_back(std::move(g));
    }
    for (const auto& a : split(f[2], '|'))
      if (!trim(a).empty()) ex.answers.insert(std::string(trim(a)));
    if (ex.graphs.empty()) throw Error(Errc::MalformedInput, "question without graphs at line " + std::to_string(lineno));
    out.push_back(std::move(ex));
  }
  return out;
}

/// Keeps only each question's original graph.
inline std::vector<QAExample> original_only(std::vector<QAExample> data) {
  for (auto& ex : data) ex.graphs.resize(1);
  return data;
}

struct TrainStats {
  int skipped = 0;   // examples with an empty oracle set, per epoch summed
  int updates = 0;   // non-zero updates
  std::vector<double> epoch_loss;  // mean loss of predictions during each epoch
};

inline void add_scaled(FeatureMap& into, const FeatureMap& phi, double scale) {
  for (const auto& [k, v] : phi) into[k] += scale * v;
}

/// Averaged structured perceptron. Oracle sets are found once up front;
/// each step moves the weights toward the best-scoring oracle tuple and
/// away from the predicted one. Example order is shuffled per epoch from
/// `seed`.
inline PerceptronModel perceptron_train(const std::vector<QAExample>& data, const KnowledgeGraph& kb,
                                        const EntityDictionary& dict, int epochs, std::size_t beam,
                                        std::uint64_t seed, TrainStats* stats = nullptr,
                                        std::size_t big_beam = kOracleBeam) {
  std::vector<std::vector<TupleCandidate>> oracles;
  for (const auto& ex : data) oracles.push_back(oracle_set(ex.graphs, kb, dict, ex.answers, big_beam));

  PerceptronModel model;
  Rng rng(derive_seed(seed, "perceptron"));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    double loss_sum = 0.0;
    for (std::size_t idx : order) {
      const auto& ex = data[idx];
      auto& oracle = oracles[idx];
      auto pred = predict(ex.graphs, kb, dict, model.weights, beam);
      if (pred) loss_sum += f1_loss(safe_denotation(pred->scored.grounding, kb), ex.answers);
      else loss_sum += 1.0;
      if (oracle.empty() || !pred) {
        if (stats) ++stats->skipped;
      } else {
        for (auto& o : oracle) o.scored.score = dot(model.weights, o.scored.features);
        const TupleCandidate* plus = &oracle.front();
        for (const auto& o : oracle)
          if (better(o, *plus)) plus = &o;
        FeatureMap delta;
        add_scaled(delta, plus->scored.features, 1.0);
        add_scaled(delta, pred->scored.features, -1.0);
        bool nonzero = false;
        for (const auto& [k, v] : delta)
          if (v != 0.0) {
            nonzero = true;
            model.weights[k] += v;
          }
        if (stats && nonzero) ++stats->updates;
      }
      add_scaled(model.sum, model.weights, 1.0);
      ++model.steps;
    }
    if (stats) stats->epoch_loss.push_back(data.empty() ? 0.0 : loss_sum / static_cast<double>(data.size()));
  }
  return model;
}

struct EvalReport {
  double avg_precision = 0.0;
  double avg_recall = 0.0;
  double avg_f1 = 0.0;
  double oracle_f1 = 0.0;       // mean best achievable F1
  double oracle_coverage = 0.0; // fraction of questions with a non-empty oracle set
  std::size_t questions = 0;
};

/// Precision/recall/F1 per question averaged over the set. An empty
/// prediction counts as precision 1, recall 0.
inline EvalReport evaluate(const std::vector<QAExample>& data, const KnowledgeGraph& kb, const EntityDictionary& dict,
                           const FeatureMap& weights, std::size_t beam, bool with_oracle = true,
                           std::size_t big_beam = kOracleBeam) {
  EvalReport rep;
  rep.questions = data.size();
  if (data.empty()) return rep;
  for (const auto& ex : data) {
    auto pred = predict(ex.graphs, kb, dict, weights, beam);
    std::set<std::string> ans = pred ? safe_denotation(pred->scored.grounding, kb) : std::set<std::string>{};
    double p = 1.0, r = 0.0, f = 0.0;
    if (!ans.empty()) {
      double inter = 0;
      for (const auto& a : ans) inter += ex.answers.count(a);
      p = inter / static_cast<double>(ans.size());
      r = inter / static_cast<double>(ex.answers.size());
      f = inter > 0 ? 2 * p * r / (p + r) : 0.0;
    }
    rep.avg_precision += p;
    rep.avg_recall += r;
    rep.avg_f1 += f;
    if (with_oracle) {
      auto o = oracle_set(ex.graphs, kb, dict, ex.answers, big_beam);
      if (!o.empty()) {
        rep.oracle_coverage += 1.0;
        rep.oracle_f1 += 1.0 - o.front().loss;
      }
    }
  }
  const double n = static_cast<double>(data.size());
  rep.avg_precision /= n;
  rep.avg_recall /= n;
  rep.avg_f1 /= n;
  rep.oracle_f1 /= n;
  rep.oracle_coverage /= n;
  return rep;
}

}  // namespace lpgen
