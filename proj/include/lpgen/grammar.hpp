#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lpgen/error.hpp"
#include "lpgen/util.hpp"

namespace lpgen {

/// Latent state of a node: a syntactic index and, for two-layer grammars, a
/// semantic index (zero and ignored for one-layer grammars). Indices are
/// 0-based.
struct State {
  std::uint32_t syn = 0;
  std::uint32_t sem = 0;

  auto operator<=>(const State&) const = default;
};

struct LayerConfig {
  int layers = 1;
  int m1 = 1;
  int m2 = 0;

  long long total_states() const { return layers == 2 ? 1LL * m1 * m2 : m1; }
  bool operator==(const LayerConfig&) const = default;
};

inline std::string format_state(const State& s, int layers) {
  std::string out = std::to_string(s.syn);
  if (layers == 2) out += ":" + std::to_string(s.sem);
  return out;
}

/// "label-h1[-h2]" node naming used in bracketed derivations.
inline std::string state_label(std::string_view symbol, const State& s, int layers) {
  std::string out(symbol);
  out += "-" + std::to_string(s.syn);
  if (layers == 2) out += "-" + std::to_string(s.sem);
  return out;
}

using SymbolId = std::uint32_t;
using WordId = std::uint32_t;

class SymbolTable {
 public:
  std::uint32_t intern(std::string_view name) {
    auto it = ids_.find(std::string(name));
    if (it != ids_.end()) return it->second;
    auto id = static_cast<std::uint32_t>(names_.size());
    names_.emplace_back(name);
    ids_.emplace(names_.back(), id);
    return id;
  }

  /// Returns size() when absent.
  std::uint32_t find(std::string_view name) const {
    auto it = ids_.find(std::string(name));
    return it == ids_.end() ? static_cast<std::uint32_t>(names_.size()) : it->second;
  }

  bool contains(std::string_view name) const { return ids_.count(std::string(name)) != 0; }
  const std::string& name(std::uint32_t id) const { return names_[id]; }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> ids_;
};

/// (symbol, state) packed into one integer key.
using ContextKey = std::uint64_t;

inline ContextKey context_key(SymbolId sym, const State& s) {
  return (static_cast<std::uint64_t>(sym) << 40) | (static_cast<std::uint64_t>(s.syn) << 20) | s.sem;
}

struct RootEntry {
  SymbolId symbol;
  State state;
  double prob;
  double logp;
};

struct BinaryRule {
  SymbolId parent;
  State parent_state;
  SymbolId left;
  State left_state;
  SymbolId right;
  State right_state;
  double prob;
  double logp;
};

struct LexicalRule {
  SymbolId parent;
  State parent_state;
  WordId word;
  double prob;
  double logp;
};

enum class SymbolKind : std::uint8_t { Unused, Interminal, Preterminal, Both };

/// A latent-variable PCFG: root parameters pi(a,h), binary parameters
/// t(a -> b c, hb, hc | a, h) and lexical parameters q(a -> x | a, h).
/// Probabilities are kept both linear (exact, for serialization) and in
/// log space (for scoring). Call finalize() after adding rules.
class LatentGrammar {
 public:
  LayerConfig layers;
  std::string binarization = "right-at";

  SymbolTable symbols;
  SymbolTable words;
  std::vector<RootEntry> roots;
  std::vector<BinaryRule> binary;
  std::vector<LexicalRule> lexical;

  void add_root(std::string_view sym, State s, double prob) {
    roots.push_back({symbols.intern(sym), s, prob, std::log(prob)});
  }
  void add_binary(std::string_view a, State ha, std::string_view b, State hb, std::string_view c, State hc,
                  double prob) {
    SymbolId ia = symbols.intern(a), ib = symbols.intern(b), ic = symbols.intern(c);
    binary.push_back({ia, ha, ib, hb, ic, hc, prob, std::log(prob)});
  }
  void add_lexical(std::string_view a, State ha, std::string_view word, double prob) {
    SymbolId ia = symbols.intern(a);
    lexical.push_back({ia, ha, words.intern(word), prob, std::log(prob)});
  }

  /// Builds lookup indexes and symbol kinds.
  void finalize() {
    binary_by_parent_.clear();
    lexical_by_parent_.clear();
    lexical_by_word_.assign(words.size(), {});
    kinds_.assign(symbols.size(), SymbolKind::Unused);
    auto mark = [&](SymbolId s, SymbolKind k) {
      auto& cur = kinds_[s];
      if (cur == SymbolKind::Unused) cur = k;
      else if (cur != k) cur = SymbolKind::Both;
    };
    for (std::uint32_t i = 0; i < binary.size(); ++i) {
      const auto& r = binary[i];
      binary_by_parent_[context_key(r.parent, r.parent_state)].push_back(i);
      mark(r.parent, SymbolKind::Interminal);
    }
    for (std::uint32_t i = 0; i < lexical.size(); ++i) {
      const auto& r = lexical[i];
      lexical_by_parent_[context_key(r.parent, r.parent_state)].push_back(i);
      lexical_by_word_[r.word].push_back(i);
      mark(r.parent, SymbolKind::Preterminal);
    }
  }

  SymbolKind kind(SymbolId s) const { return s < kinds_.size() ? kinds_[s] : SymbolKind::Unused; }
  bool is_interminal(SymbolId s) const { return kind(s) == SymbolKind::Interminal; }
  bool is_preterminal(SymbolId s) const { return kind(s) == SymbolKind::Preterminal; }

  const std::vector<std::uint32_t>& binary_rules(SymbolId a, const State& h) const {
    return lookup(binary_by_parent_, context_key(a, h));
  }
  const std::vector<std::uint32_t>& lexical_rules(SymbolId a, const State& h) const {
    return lookup(lexical_by_parent_, context_key(a, h));
  }
  const std::vector<std::uint32_t>& lexical_rules_for_word(WordId w) const {
    static const std::vector<std::uint32_t> empty;
    return w < lexical_by_word_.size() ? lexical_by_word_[w] : empty;
  }
  const std::unordered_map<ContextKey, std::vector<std::uint32_t>>& binary_index() const {
    return binary_by_parent_;
  }
  const std::unordered_map<ContextKey, std::vector<std::uint32_t>>& lexical_index() const {
    return lexical_by_parent_;
  }

  /// Looks a token up in the vocabulary, falling back to its lowercase form.
  WordId find_word(std::string_view token) const {
    WordId w = words.find(token);
    if (w < words.size()) return w;
    return words.find(to_lower(token));
  }

  bool empty() const { return roots.empty() && binary.empty() && lexical.empty(); }

 private:
  static const std::vector<std::uint32_t>& lookup(
      const std::unordered_map<ContextKey, std::vector<std::uint32_t>>& m, ContextKey k) {
    static const std::vector<std::uint32_t> empty;
    auto it = m.find(k);
    return it == m.end() ? empty : it->second;
  }

  std::unordered_map<ContextKey, std::vector<std::uint32_t>> binary_by_parent_;
  std::unordered_map<ContextKey, std::vector<std::uint32_t>> lexical_by_parent_;
  std::vector<std::vector<std::uint32_t>> lexical_by_word_;
  std::vector<SymbolKind> kinds_;
};

// ---------------------------------------------------------------------------
// Validation

inline constexpr double kNormTolerance = 1e-9;

enum class ViolationKind { Distribution, RootMass, Deficit, SymbolMisuse, BadProbability, StateRange };

struct Violation {
  ViolationKind kind;
  std::string symbol;  // empty for grammar-wide findings
  State state;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;
  std::vector<std::string> notes;

  bool ok() const { return violations.empty(); }
};

inline std::string with_thousands(long long v) {
  std::string digits = std::to_string(v);
  std::string out;
  int n = static_cast<int>(digits.size());
  for (int i = 0; i < n; ++i) {
    if (i > 0 && (n - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return out;
}

inline ValidationReport validate(const LatentGrammar& g) {
  ValidationReport rep;
  const int L = g.layers.layers;
  rep.notes.push_back("layer config: " + with_thousands(g.layers.total_states()) + " latent states (layers=" +
                      std::to_string(L) + " m1=" + std::to_string(g.layers.m1) +
                      " m2=" + std::to_string(g.layers.m2) + ")");

  auto add = [&](ViolationKind k, SymbolId s, State h, std::string detail) {
    rep.violations.push_back({k, g.symbols.name(s), h, std::move(detail)});
  };
  auto check_state = [&](SymbolId s, const State& h) {
    bool bad = static_cast<int>(h.syn) >= g.layers.m1 ||
               (L == 2 ? static_cast<int>(h.sem) >= g.layers.m2 : h.sem != 0);
    if (bad) add(ViolationKind::StateRange, s, h, "state " + format_state(h, 2) + " outside layer config");
  };
  auto check_prob = [&](SymbolId s, const State& h, double p, const char* what) {
    if (!(p > 0.0 && p <= 1.0) || !std::isfinite(p))
      add(ViolationKind::BadProbability, s, h, std::string(what) + " probability " + format_double(p));
  };

  if (L != 1 && L != 2) rep.violations.push_back({ViolationKind::StateRange, "", {}, "layers must be 1 or 2"});
  if (g.layers.m1 < 1 || (L == 2 && g.layers.m2 < 1))
    rep.violations.push_back({ViolationKind::StateRange, "", {}, "state counts must be positive"});

  for (SymbolId s = 0; s < g.symbols.size(); ++s)
    if (g.kind(s) == SymbolKind::Both)
      add(ViolationKind::SymbolMisuse, s, {}, "symbol has both binary and lexical rules");

  double root_mass = 0.0;
  for (const auto& r : g.roots) {
    root_mass += r.prob;
    check_state(r.symbol, r.state);
    check_prob(r.symbol, r.state, r.prob, "root");
    if (g.binary_rules(r.symbol, r.state).empty() && g.lexical_rules(r.symbol, r.state).empty())
      add(ViolationKind::Deficit, r.symbol, r.state, "root context has no expansions");
  }
  if (std::abs(root_mass - 1.0) > kNormTolerance)
    rep.violations.push_back({ViolationKind::RootMass, "", {}, "root mass sums to " + format_double(root_mass)});

  // Sorted traversal keeps the report order deterministic.
  std::map<ContextKey, double> bin_sums, lex_sums;
  for (const auto& r : g.binary) {
    bin_sums[context_key(r.parent, r.parent_state)] += r.prob;
    check_state(r.parent, r.parent_state);
    check_state(r.left, r.left_state);
    check_state(r.right, r.right_state);
    check_prob(r.parent, r.parent_state, r.prob, "binary");
    for (auto [c, hc] : {std::pair{r.left, r.left_state}, std::pair{r.right, r.right_state}}) {
      if (g.binary_rules(c, hc).empty() && g.lexical_rules(c, hc).empty())
        add(ViolationKind::Deficit, c, hc,
            "child context referenced by " + g.symbols.name(r.parent) + " has no expansions");
    }
  }
  for (const auto& r : g.lexical) {
    lex_sums[context_key(r.parent, r.parent_state)] += r.prob;
    check_state(r.parent, r.parent_state);
    check_prob(r.parent, r.parent_state, r.prob, "lexical");
  }
  auto unpack = [](ContextKey k) {
    return std::pair{static_cast<SymbolId>(k >> 40),
                     State{static_cast<std::uint32_t>((k >> 20) & 0xFFFFF), static_cast<std::uint32_t>(k & 0xFFFFF)}};
  };
  for (const auto* sums : {&bin_sums, &lex_sums}) {
    for (const auto& [k, sum] : *sums) {
      if (std::abs(sum - 1.0) > kNormTolerance) {
        auto [s, h] = unpack(k);
        add(ViolationKind::Distribution, s, h,
            std::string(sums == &bin_sums ? "binary" : "lexical") + " distribution sums to " + format_double(sum));
      }
    }
  }
  return rep;
}

inline std::string format_report(const LatentGrammar& g, const ValidationReport& rep) {
  std::string out;
  for (const auto& n : rep.notes) out += "NOTE\t" + n + "\n";
  for (const auto& v : rep.violations) {
    static const char* names[] = {"distribution", "root-mass", "deficit", "symbol-misuse", "bad-probability",
                                  "state-range"};
    out += "VIOLATION\t";
    out += names[static_cast<int>(v.kind)];
    out += "\t" + (v.symbol.empty() ? std::string("-") : v.symbol + "\t" + format_state(v.state, g.layers.layers));
    out += "\t" + v.detail + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

/// Canonical text form: header line, then ROOT, BIN, LEX lines each sorted
/// lexicographically. Probabilities use 17 significant digits.
inline std::string serialize(const LatentGrammar& g) {
  const int L = g.layers.layers;
  auto st = [&](const State& s) { return format_state(s, L); };
  std::vector<std::string> root_lines, bin_lines, lex_lines;
  for (const auto& r : g.roots)
    root_lines.push_back("ROOT\t" + g.symbols.name(r.symbol) + "\t" + st(r.state) + "\t" + format_double(r.prob));
  for (const auto& r : g.binary)
    bin_lines.push_back("BIN\t" + g.symbols.name(r.parent) + "\t" + st(r.parent_state) + "\t" +
                        g.symbols.name(r.left) + "\t" + st(r.left_state) + "\t" + g.symbols.name(r.right) + "\t" +
                        st(r.right_state) + "\t" + format_double(r.prob));
  for (const auto& r : g.lexical)
    lex_lines.push_back("LEX\t" + g.symbols.name(r.parent) + "\t" + st(r.parent_state) + "\t" +
                        g.words.name(r.word) + "\t" + format_double(r.prob));
  std::sort(root_lines.begin(), root_lines.end());
  std::sort(bin_lines.begin(), bin_lines.end());
  std::sort(lex_lines.begin(), lex_lines.end());

  std::string out = "LPCFG v1 layers=" + std::to_string(L) + " m1=" + std::to_string(g.layers.m1) +
                    " m2=" + std::to_string(L == 2 ? g.layers.m2 : 0) + " binarization=" + g.binarization +
                    " vocab=" + std::to_string(g.words.size()) + "\n";
  for (const auto* block : {&root_lines, &bin_lines, &lex_lines})
    for (const auto& l : *block) out += l + "\n";
  return out;
}

namespace detail {

inline State parse_state(std::string_view text, int layers) {
  constexpr auto E = Errc::MalformedGrammarFile;
  auto parts = split(text, ':');
  if (static_cast<int>(parts.size()) != layers) throw Error(E, "state '" + std::string(text) + "' has wrong arity");
  State s;
  long long a = parse_int(parts[0], E);
  long long b = layers == 2 ? parse_int(parts[1], E) : 0;
  if (a < 0 || b < 0 || a >= (1 << 20) || b >= (1 << 20)) throw Error(E, "state index out of range");
  s.syn = static_cast<std::uint32_t>(a);
  s.sem = static_cast<std::uint32_t>(b);
  return s;
}

}  // namespace detail

inline LatentGrammar deserialize(std::string_view text) {
  constexpr auto E = Errc::MalformedGrammarFile;
  auto lines = split(text, '\n');
  std::size_t i = 0;
  while (i < lines.size() && trim(lines[i]).empty()) ++i;
  if (i == lines.size()) throw Error(E, "missing header");
  auto header = split_ws(lines[i]);
  if (header.size() < 5 || header[0] != "LPCFG" || header[1] != "v1") throw Error(E, "bad header");

  LatentGrammar g;
  std::map<std::string, std::string> kv;
  for (std::size_t k = 2; k < header.size(); ++k) {
    auto eq = header[k].find('=');
    if (eq == std::string::npos) throw Error(E, "bad header field '" + header[k] + "'");
    kv[header[k].substr(0, eq)] = header[k].substr(eq + 1);
  }
  if (!kv.count("layers") || !kv.count("m1") || !kv.count("m2")) throw Error(E, "header lacks layers/m1/m2");
  g.layers.layers = static_cast<int>(parse_int(kv["layers"], E));
  g.layers.m1 = static_cast<int>(parse_int(kv["m1"], E));
  g.layers.m2 = static_cast<int>(parse_int(kv["m2"], E));
  if (g.layers.layers != 1 && g.layers.layers != 2) throw Error(E, "layers must be 1 or 2");
  if (kv.count("binarization")) g.binarization = kv["binarization"];
  const int L = g.layers.layers;

  for (++i; i < lines.size(); ++i) {
    auto f = split_ws(lines[i]);
    if (f.empty()) continue;
    auto where = [&] { return "line " + std::to_string(i + 1); };
    if (f[0] == "ROOT") {
      if (f.size() != 4) throw Error(E, where() + ": ROOT needs 3 fields");
      g.add_root(f[1], detail::parse_state(f[2], L), parse_double(f[3], E));
    } else if (f[0] == "BIN") {
      if (f.size() != 8) throw Error(E, where() + ": BIN needs 7 fields");
      g.add_binary(f[1], detail::parse_state(f[2], L), f[3], detail::parse_state(f[4], L), f[5],
                   detail::parse_state(f[6], L), parse_double(f[7], E));
    } else if (f[0] == "LEX") {
      if (f.size() != 5) throw Error(E, where() + ": LEX needs 4 fields");
      g.add_lexical(f[1], detail::parse_state(f[2], L), f[3], parse_double(f[4], E));
    } else {
      throw Error(E, where() + ": unknown record '" + f[0] + "'");
    }
  }
  if (g.roots.empty()) throw Error(E, "grammar has no ROOT entries");
  g.finalize();
  return g;
}

inline LatentGrammar load_grammar(const std::filesystem::path& path) { return deserialize(read_file(path)); }

inline void save_grammar(const LatentGrammar& g, const std::filesystem::path& path) {
  write_file_atomic(path, serialize(g));
}

}  // namespace lpgen
