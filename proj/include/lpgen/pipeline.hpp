#pragma once

#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lpgen/classifier.hpp"
#include "lpgen/error.hpp"
#include "lpgen/grammar.hpp"
#include "lpgen/lattice.hpp"
#include "lpgen/sampler.hpp"
#include "lpgen/util.hpp"

namespace lpgen {

/// Flat "key = value" file; '#' starts a comment line.
inline std::map<std::string, std::string> parse_config(std::string_view text) {
  std::map<std::string, std::string> out;
  std::size_t lineno = 0;
  for (const auto& raw : split(text, '\n')) {
    ++lineno;
    auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(Errc::MalformedInput, "config line " + std::to_string(lineno) + " has no '='");
    auto key = std::string(trim(line.substr(0, eq)));
    if (key.empty()) throw Error(Errc::MalformedInput, "config line " + std::to_string(lineno) + " has an empty key");
    out[key] = std::string(trim(line.substr(eq + 1)));
  }
  return out;
}

struct PipelineConfig {
  // Paths.
  std::string treebank, alignments, rules, gazetteer, kb, entities, qa_train, qa_test, output, grammar,
      bilayered, classifier, pairs, questions, model, lattice_file;
  // Parameters.
  int m1 = 24;
  int m2 = 1000;
  int m_samples = 20;
  std::uint64_t seed = 1;
  std::size_t beam = 100;
  int epochs = 20;
  double min_rule_score = -std::numeric_limits<double>::infinity();
  std::optional<double> threshold;
  bool paraphrases = true;
  std::string mode = "rules";
};

namespace detail {

inline int positive_int(const std::string& key, const std::string& v) {
  long long x = parse_int(v, Errc::MalformedInput);
  if (x <= 0 || x > (1 << 20)) throw Error(Errc::MalformedInput, key + " must be a positive integer");
  return static_cast<int>(x);
}

}  // namespace detail

/// Builds a typed config from merged key/value settings. Unknown keys are
/// rejected so typos surface as usage errors.
inline PipelineConfig make_config(const std::map<std::string, std::string>& kv) {
  PipelineConfig c;
  std::map<std::string, std::string*> paths = {
      {"treebank", &c.treebank},   {"alignments", &c.alignments}, {"rules", &c.rules},
      {"gazetteer", &c.gazetteer}, {"kb", &c.kb},                 {"entities", &c.entities},
      {"qa_train", &c.qa_train},   {"qa_test", &c.qa_test},       {"output", &c.output},
      {"grammar", &c.grammar},     {"bilayered", &c.bilayered},   {"classifier", &c.classifier},
      {"pairs", &c.pairs},         {"questions", &c.questions},   {"model", &c.model},
      {"lattice_file", &c.lattice_file}};
  for (const auto& [k, v] : kv) {
    if (auto it = paths.find(k); it != paths.end()) {
      *it->second = v;
    } else if (k == "m1") {
      c.m1 = detail::positive_int(k, v);
    } else if (k == "m2") {
      c.m2 = detail::positive_int(k, v);
    } else if (k == "m" || k == "m_samples") {
      c.m_samples = detail::positive_int(k, v);
    } else if (k == "beam") {
      c.beam = static_cast<std::size_t>(detail::positive_int(k, v));
    } else if (k == "epochs") {
      c.epochs = detail::positive_int(k, v);
    } else if (k == "seed") {
      long long s = parse_int(v, Errc::MalformedInput);
      if (s < 0) throw Error(Errc::MalformedInput, "seed must be non-negative");
      c.seed = static_cast<std::uint64_t>(s);
    } else if (k == "min_rule_score") {
      c.min_rule_score = parse_double(v, Errc::MalformedInput);
    } else if (k == "threshold") {
      c.threshold = parse_double(v, Errc::MalformedInput);
      if (*c.threshold < 0.0 || *c.threshold > 1.0) throw Error(Errc::MalformedInput, "threshold must lie in [0,1]");
    } else if (k == "paraphrases") {
      if (v != "true" && v != "false") throw Error(Errc::MalformedInput, "paraphrases must be true or false");
      c.paraphrases = v == "true";
    } else if (k == "mode" || k == "lattice") {
      if (v != "naive" && v != "rules" && v != "bilayered")
        throw Error(Errc::MalformedInput, "lattice mode must be naive, rules or bilayered");
      c.mode = v;
    } else {
      throw Error(Errc::MalformedInput, "unknown config key '" + k + "'");
    }
  }
  return c;
}

/// Throws MalformedInput naming the first missing setting or Io for a path
/// that does not exist.
inline void require_inputs(std::initializer_list<std::pair<const char*, const std::string*>> need) {
  for (const auto& [name, path] : need) {
    if (path->empty()) throw Error(Errc::MalformedInput, std::string("missing required setting '") + name + "'");
    if (!std::filesystem::exists(*path)) throw Error(Errc::Io, std::string(name) + ": no such file '" + *path + "'");
  }
}

// ---------------------------------------------------------------------------
// Paraphrase generation

struct ParaphraseResources {
  const LatentGrammar* grammar = nullptr;      // sampling grammar
  const ParaphraseRuleDB* rules = nullptr;     // mode "rules"
  const LatentGrammar* bilayered = nullptr;    // mode "bilayered"
  const ClassifierModel* classifier = nullptr; // optional filter
  const Gazetteer* gazetteer = nullptr;
};

inline WordLattice build_lattice(const std::string& mode, const Tokens& question, const ParaphraseResources& res) {
  if (mode == "naive") return build_naive(question);
  if (mode == "rules") {
    if (!res.rules) throw Error(Errc::MalformedInput, "rules mode needs a rule database");
    return build_from_rules(question, *res.rules);
  }
  if (mode == "bilayered") {
    if (!res.bilayered) throw Error(Errc::MalformedInput, "bilayered mode needs a bi-layered grammar");
    return build_bilayered(question, *res.bilayered);
  }
  throw Error(Errc::MalformedInput, "unknown lattice mode '" + mode + "'");
}

struct ParaphraseRow {
  std::size_t qid = 0;
  std::uint64_t seed = 0;
  double score = 0.0;
  std::string text;
};

struct ParaphraseSummary {
  std::size_t questions = 0;
  std::size_t with_candidates = 0;
  std::size_t empty_intersections = 0;
  std::size_t parse_failures = 0;
};

/// Lattice, prune, sample, classify for one question. Questions whose
/// lattice shares no string with the grammar yield no rows.
inline std::vector<ParaphraseRow> paraphrase_question(std::size_t qid, const Tokens& question,
                                                      const std::string& mode, const ParaphraseResources& res,
                                                      int m_samples, std::uint64_t seed,
                                                      ParaphraseSummary* summary = nullptr) {
  if (!res.grammar) throw Error(Errc::MalformedInput, "paraphrasing needs a sampling grammar");
  Tokens q = lower_all(question);
  std::vector<ParaphraseRow> rows;
  if (summary) ++summary->questions;
  std::vector<ParaphraseCandidate> cands;
  try {
    WordLattice w = build_lattice(mode, q, res);
    cands = sample_many(q, *res.grammar, w, m_samples, seed);
  } catch (const Error& e) {
    if (e.code() == Errc::EmptyIntersection) {
      if (summary) ++summary->empty_intersections;
      return rows;
    }
    if (e.code() == Errc::ParseFailure) {
      if (summary) ++summary->parse_failures;
      return rows;
    }
    throw;
  }
  if (res.classifier) {
    std::vector<EntitySpan> ents;
    if (res.gazetteer) ents = res.gazetteer->tag(q);
    cands = filter_candidates(*res.classifier, q, std::move(cands), ents);
  } else {
    for (auto& c : cands) c.score = 1.0;
  }
  for (const auto& c : cands) rows.push_back({qid, c.seed, c.score, detokenize(c.tokens)});
  if (summary && !rows.empty()) ++summary->with_candidates;
  return rows;
}

inline std::string format_rows(const std::vector<ParaphraseRow>& rows) {
  std::string out;
  for (const auto& r : rows)
    out += std::to_string(r.qid) + "\t" + std::to_string(r.seed) + "\t" + format_double(r.score) + "\t" + r.text + "\n";
  return out;
}

}  // namespace lpgen
