#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "lpgen/error.hpp"
#include "lpgen/sampler.hpp"
#include "lpgen/util.hpp"

namespace lpgen {

// ---------------------------------------------------------------------------
// Dictionary entity tagging

struct EntitySpan {
  int begin = 0;
  int end = 0;

  bool operator==(const EntitySpan&) const = default;
};

/// Entity surface forms, matched case-insensitively, longest first.
class Gazetteer {
 public:
  Gazetteer() = default;
  explicit Gazetteer(const std::vector<std::string>& forms) {
    for (const auto& f : forms) add(f);
  }

  void add(std::string_view form) {
    Tokens t = lower_all(split_ws(form));
    if (t.empty()) return;
    max_len_ = std::max(max_len_, t.size());
    forms_.emplace(std::move(t), static_cast<int>(forms_.size()));
  }

  /// Non-overlapping spans, scanning left to right and preferring the
  /// longest form at each position.
  std::vector<EntitySpan> tag(const Tokens& tokens) const {
    Tokens low = lower_all(tokens);
    std::vector<EntitySpan> out;
    std::size_t i = 0;
    while (i < low.size()) {
      std::size_t matched = 0;
      for (std::size_t len = std::min(max_len_, low.size() - i); len >= 1; --len) {
        Tokens probe(low.begin() + static_cast<std::ptrdiff_t>(i), low.begin() + static_cast<std::ptrdiff_t>(i + len));
        if (forms_.count(probe)) {
          matched = len;
          break;
        }
      }
      if (matched) {
        out.push_back({static_cast<int>(i), static_cast<int>(i + matched)});
        i += matched;
      } else {
        ++i;
      }
    }
    return out;
  }

  std::size_t size() const { return forms_.size(); }

 private:
  std::map<Tokens, int> forms_;
  std::size_t max_len_ = 0;
};

/// One surface form per line; an optional tab-separated second field is
/// ignored here (the semantic parser uses it as the KB id).
inline Gazetteer load_gazetteer(const std::filesystem::path& path) {
  Gazetteer g;
  for (const auto& line : read_lines(path)) {
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    g.add(split(t, '\t').front());
  }
  return g;
}

// ---------------------------------------------------------------------------
// Pair features

inline constexpr std::size_t kNumPairFeatures = 9;

inline const std::array<std::string_view, kNumPairFeatures>& pair_feature_names() {
  static const std::array<std::string_view, kNumPairFeatures> names = {
      "bleu1", "bleu2", "bleu3", "bleu4", "ter", "length_ratio", "unigram_precision", "unigram_recall",
      "ne_preserved"};
  return names;
}

struct PairFeatures {
  double bleu1 = 0, bleu2 = 0, bleu3 = 0, bleu4 = 0;
  double ter = 0;
  double length_ratio = 0;
  double unigram_precision = 0, unigram_recall = 0;
  double ne_preserved = 0;

  std::array<double, kNumPairFeatures> values() const {
    return {bleu1, bleu2, bleu3, bleu4, ter, length_ratio, unigram_precision, unigram_recall, ne_preserved};
  }
};

namespace detail {

inline std::map<Tokens, int> ngram_counts(const Tokens& t, std::size_t n) {
  std::map<Tokens, int> out;
  for (std::size_t i = 0; i + n <= t.size(); ++i)
    ++out[Tokens(t.begin() + static_cast<std::ptrdiff_t>(i), t.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return out;
}

inline std::pair<int, int> clipped_matches(const Tokens& hyp, const Tokens& ref, std::size_t n) {
  auto h = ngram_counts(hyp, n);
  auto r = ngram_counts(ref, n);
  int match = 0, total = 0;
  for (const auto& [g, c] : h) {
    total += c;
    auto it = r.find(g);
    if (it != r.end()) match += std::min(c, it->second);
  }
  return {match, total};
}

/// BLEU with maximum order n; unigram precision unsmoothed, add-1 for n >= 2.
inline double bleu(const Tokens& hyp, const Tokens& ref, std::size_t n) {
  double log_sum = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    auto [m, t] = clipped_matches(hyp, ref, k);
    double p = k == 1 ? (t ? static_cast<double>(m) / t : 0.0) : (m + 1.0) / (t + 1.0);
    if (p <= 0.0) return 0.0;
    log_sum += std::log(p);
  }
  double c = static_cast<double>(hyp.size()), r = static_cast<double>(ref.size());
  double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum / static_cast<double>(n));
}

inline int edit_distance(const Tokens& a, const Tokens& b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline int count_occurrences(const Tokens& hay, const Tokens& needle) {
  int n = 0;
  if (needle.empty() || needle.size() > hay.size()) return 0;
  for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i)
    if (std::equal(needle.begin(), needle.end(), hay.begin() + static_cast<std::ptrdiff_t>(i))) ++n;
  return n;
}

}  // namespace detail

/// MT-style features of a candidate against its source, plus whether every
/// annotated source entity survives verbatim (case-insensitive) in the
/// candidate.
inline PairFeatures compute_features(const Tokens& source, const Tokens& candidate,
                                     const std::vector<EntitySpan>& entities) {
  if (source.empty() || candidate.empty()) throw Error(Errc::EmptySentence, "empty sentence in pair");
  Tokens src = lower_all(source), cand = lower_all(candidate);
  PairFeatures f;
  f.bleu1 = detail::bleu(cand, src, 1);
  f.bleu2 = detail::bleu(cand, src, 2);
  f.bleu3 = detail::bleu(cand, src, 3);
  f.bleu4 = detail::bleu(cand, src, 4);
  f.ter = std::min(2.0, static_cast<double>(detail::edit_distance(cand, src)) / static_cast<double>(src.size()));
  f.length_ratio = static_cast<double>(cand.size()) / static_cast<double>(src.size());
  auto [m, t] = detail::clipped_matches(cand, src, 1);
  f.unigram_precision = static_cast<double>(m) / static_cast<double>(cand.size());
  f.unigram_recall = static_cast<double>(m) / static_cast<double>(src.size());

  std::map<Tokens, int> need;
  for (const auto& e : entities) {
    if (e.begin < 0 || e.end > static_cast<int>(src.size()) || e.begin >= e.end)
      throw Error(Errc::MalformedInput, "entity span out of range");
    ++need[Tokens(src.begin() + e.begin, src.begin() + e.end)];
  }
  f.ne_preserved = 1.0;
  for (const auto& [ent, c] : need)
    if (detail::count_occurrences(cand, ent) < c) f.ne_preserved = 0.0;
  return f;
}

// ---------------------------------------------------------------------------
// Logistic-regression classifier

/// Weights act on raw feature values; training-time standardization is
/// folded into them.
struct ClassifierModel {
  std::array<double, kNumPairFeatures> weights{};
  double bias = 0.0;
  double threshold = 0.5;

  double logit(const PairFeatures& f) const {
    auto x = f.values();
    double z = bias;
    for (std::size_t j = 0; j < kNumPairFeatures; ++j) z += weights[j] * x[j];
    return z;
  }
  double score(const PairFeatures& f) const { return 1.0 / (1.0 + std::exp(-logit(f))); }

  bool operator==(const ClassifierModel&) const = default;
};

struct LabeledPair {
  Tokens source;
  Tokens candidate;
  int label = 0;
};

/// "source<TAB>candidate<TAB>0|1"
inline std::vector<LabeledPair> read_labeled_pairs(const std::filesystem::path& path) {
  std::vector<LabeledPair> out;
  std::size_t lineno = 0;
  for (const auto& line : read_lines(path)) {
    ++lineno;
    if (trim(line).empty() || trim(line).front() == '#') continue;
    auto f = split(line, '\t');
    auto where = path.string() + ":" + std::to_string(lineno);
    if (f.size() != 3) throw Error(Errc::MalformedInput, where + ": expected 3 fields");
    auto lab = trim(f[2]);
    if (lab != "0" && lab != "1") throw Error(Errc::MalformedInput, where + ": label must be 0 or 1");
    out.push_back({split_ws(f[0]), split_ws(f[1]), lab == "1" ? 1 : 0});
  }
  return out;
}

struct TrainOptions {
  int epochs = 500;
  double learning_rate = 0.1;
  double l2 = 1e-3;
  double heldout_fraction = 0.2;
};

namespace detail {

struct WeightedExample {
  std::array<double, kNumPairFeatures> x;
  int y;
  double w;
};

inline double f1_at(const std::vector<std::pair<double, const WeightedExample*>>& scored, double thr) {
  double tp = 0, fp = 0, fn = 0;
  for (auto [s, e] : scored) {
    bool pred = s >= thr;
    if (pred && e->y) tp += e->w;
    else if (pred) fp += e->w;
    else if (e->y) fn += e->w;
  }
  return tp > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
}

}  // namespace detail

/// Full-batch gradient descent on the standardized features of the training
/// split; the threshold maximizes positive-class F1 on the held-out split.
/// Identical examples are merged with multiplicity weights and assigned to a
/// split by a seeded hash of their content, so the model depends only on the
/// example multiset and the seed.
inline ClassifierModel train_classifier(const std::vector<LabeledPair>& pairs, std::uint64_t seed,
                                        const Gazetteer* gazetteer = nullptr, const TrainOptions& opt = {}) {
  std::map<std::tuple<std::string, std::string, int>, double> counts;
  for (const auto& p : pairs) ++counts[{join(p.source), join(p.candidate), p.label}];
  bool has_pos = false, has_neg = false;
  for (const auto& [k, c] : counts) (std::get<2>(k) ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg) throw Error(Errc::DegenerateLabels, "training data needs both labels");

  std::vector<detail::WeightedExample> train, held;
  const auto modulus = static_cast<std::uint64_t>(std::llround(1.0 / opt.heldout_fraction));
  for (const auto& [k, c] : counts) {
    const auto& [s, cand, y] = k;
    Tokens src = split_ws(s), can = split_ws(cand);
    auto ents = gazetteer ? gazetteer->tag(src) : std::vector<EntitySpan>{};
    detail::WeightedExample ex{compute_features(src, can, ents).values(), y, c};
    bool is_held = derive_seed(seed, s + "\t" + cand + "\t" + std::to_string(y)) % modulus == 0;
    (is_held ? held : train).push_back(ex);
  }
  auto has_both = [](const std::vector<detail::WeightedExample>& v) {
    bool p = false, n = false;
    for (const auto& e : v) (e.y ? p : n) = true;
    return p && n;
  };
  if (!has_both(train)) {
    train.insert(train.end(), held.begin(), held.end());
    held.clear();
  }

  constexpr std::size_t D = kNumPairFeatures;
  double wsum = 0.0;
  std::array<double, D> mean{}, sd{};
  for (const auto& e : train) {
    wsum += e.w;
    for (std::size_t j = 0; j < D; ++j) mean[j] += e.w * e.x[j];
  }
  for (auto& m : mean) m /= wsum;
  for (const auto& e : train)
    for (std::size_t j = 0; j < D; ++j) sd[j] += e.w * (e.x[j] - mean[j]) * (e.x[j] - mean[j]);
  for (auto& s : sd) {
    s = std::sqrt(s / wsum);
    if (!(s > 1e-12)) s = 1.0;
  }
  std::vector<std::array<double, D>> z(train.size());
  for (std::size_t i = 0; i < train.size(); ++i)
    for (std::size_t j = 0; j < D; ++j) z[i][j] = (train[i].x[j] - mean[j]) / sd[j];

  std::array<double, D> w{};
  double b = 0.0;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    std::array<double, D> gw{};
    double gb = 0.0;
    for (std::size_t i = 0; i < train.size(); ++i) {
      double a = b;
      for (std::size_t j = 0; j < D; ++j) a += w[j] * z[i][j];
      double err = train[i].w * (1.0 / (1.0 + std::exp(-a)) - train[i].y);
      for (std::size_t j = 0; j < D; ++j) gw[j] += err * z[i][j];
      gb += err;
    }
    for (std::size_t j = 0; j < D; ++j) w[j] -= opt.learning_rate * (gw[j] / wsum + opt.l2 * w[j]);
    b -= opt.learning_rate * gb / wsum;
  }

  ClassifierModel model;
  model.bias = b;
  for (std::size_t j = 0; j < D; ++j) {
    model.weights[j] = w[j] / sd[j];
    model.bias -= w[j] * mean[j] / sd[j];
  }

  const auto& tune = has_both(held) ? held : train;
  std::vector<std::pair<double, const detail::WeightedExample*>> scored;
  std::vector<double> values;
  for (const auto& e : tune) {
    double a = model.bias;
    for (std::size_t j = 0; j < D; ++j) a += model.weights[j] * e.x[j];
    double s = 1.0 / (1.0 + std::exp(-a));
    scored.emplace_back(s, &e);
    values.push_back(s);
  }
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  std::vector<double> cands{values.front() / 2.0};
  for (std::size_t i = 1; i < values.size(); ++i) cands.push_back((values[i - 1] + values[i]) / 2.0);
  cands.push_back((values.back() + 1.0) / 2.0);
  double best_f1 = -1.0;
  for (double t : cands) {
    double f1 = detail::f1_at(scored, t);
    if (f1 >= best_f1) {
      best_f1 = f1;
      model.threshold = t;
    }
  }
  return model;
}

inline std::string serialize(const ClassifierModel& m) {
  std::string out;
  for (std::size_t j = 0; j < kNumPairFeatures; ++j)
    out += "FEATURE\t" + std::string(pair_feature_names()[j]) + "\t" + format_double(m.weights[j]) + "\n";
  out += "BIAS\t" + format_double(m.bias) + "\n";
  out += "THRESHOLD\t" + format_double(m.threshold) + "\n";
  return out;
}

inline ClassifierModel deserialize_classifier(std::string_view text) {
  constexpr auto E = Errc::MalformedInput;
  ClassifierModel m;
  std::array<bool, kNumPairFeatures> seen{};
  bool bias = false, thr = false;
  for (const auto& line : split(text, '\n')) {
    auto f = split_ws(line);
    if (f.empty()) continue;
    if (f[0] == "FEATURE" && f.size() == 3) {
      const auto& names = pair_feature_names();
      auto it = std::find(names.begin(), names.end(), f[1]);
      if (it == names.end()) throw Error(E, "unknown classifier feature '" + f[1] + "'");
      auto j = static_cast<std::size_t>(it - names.begin());
      m.weights[j] = parse_double(f[2], E);
      seen[j] = true;
    } else if (f[0] == "BIAS" && f.size() == 2) {
      m.bias = parse_double(f[1], E);
      bias = true;
    } else if (f[0] == "THRESHOLD" && f.size() == 2) {
      m.threshold = parse_double(f[1], E);
      thr = true;
    } else {
      throw Error(E, "bad classifier model line '" + line + "'");
    }
  }
  if (!bias || !thr || std::find(seen.begin(), seen.end(), false) != seen.end())
    throw Error(E, "classifier model is incomplete");
  return m;
}

/// Scores every candidate, drops those below the threshold, and orders the
/// rest by descending score, then ascending seed.
inline std::vector<ParaphraseCandidate> filter_candidates(const ClassifierModel& model, const Tokens& source,
                                                          std::vector<ParaphraseCandidate> candidates,
                                                          const std::vector<EntitySpan>& entities) {
  std::vector<ParaphraseCandidate> out;
  for (auto& c : candidates) {
    c.score = model.score(compute_features(source, c.tokens, entities));
    if (c.score >= model.threshold) out.push_back(std::move(c));
  }
  std::stable_sort(out.begin(), out.end(), [](const ParaphraseCandidate& a, const ParaphraseCandidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.seed < b.seed;
  });
  return out;
}

}  // namespace lpgen
