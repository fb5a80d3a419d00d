#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "lpgen/classifier.hpp"
#include "support.hpp"

using namespace lpgen;

namespace {

std::vector<ParaphraseCandidate> candidates(const std::vector<std::string>& texts) {
  std::vector<ParaphraseCandidate> out;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    ParaphraseCandidate c;
    c.tokens = split_ws(texts[i]);
    c.seed = 100 + i;
    out.push_back(c);
  }
  return out;
}

std::vector<LabeledPair> bundled_pairs() {
  return read_labeled_pairs(testing_support::data_path("classifier/train.tsv"));
}

}  // namespace

TEST(Features, IdenticalSentences) {
  Tokens s = split_ws("what language is spoken in peru");
  auto f = compute_features(s, s, {{5, 6}});
  EXPECT_DOUBLE_EQ(f.bleu1, 1.0);
  EXPECT_DOUBLE_EQ(f.bleu2, 1.0);
  EXPECT_DOUBLE_EQ(f.bleu3, 1.0);
  EXPECT_DOUBLE_EQ(f.bleu4, 1.0);
  EXPECT_DOUBLE_EQ(f.ter, 0.0);
  EXPECT_DOUBLE_EQ(f.length_ratio, 1.0);
  EXPECT_DOUBLE_EQ(f.ne_preserved, 1.0);
  EXPECT_EQ(pair_feature_names().size(), 9u);
}

TEST(Features, DisjointVocabulary) {
  auto f = compute_features(split_ws("a b c"), split_ws("x y"), {});
  EXPECT_DOUBLE_EQ(f.unigram_precision, 0.0);
  EXPECT_DOUBLE_EQ(f.unigram_recall, 0.0);
  EXPECT_DOUBLE_EQ(f.bleu1, 0.0);
  EXPECT_DOUBLE_EQ(f.ter, 1.0);
}

TEST(Features, HandCountedOverlap) {
  auto f = compute_features(split_ws("what day is nochebuena"), split_ws("when is nochebuena"), {});
  EXPECT_DOUBLE_EQ(f.unigram_precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(f.unigram_recall, 2.0 / 4.0);
  EXPECT_DOUBLE_EQ(f.length_ratio, 3.0 / 4.0);
  EXPECT_DOUBLE_EQ(f.ter, 2.0 / 4.0);
}

TEST(Features, EntityPreservation) {
  Tokens src = split_ws("what currency is used in Czech Republic");
  std::vector<EntitySpan> ents = {{5, 7}};
  EXPECT_EQ(compute_features(src, split_ws("which money does czech republic use"), ents).ne_preserved, 1.0);
  EXPECT_EQ(compute_features(src, split_ws("which money does czech use"), ents).ne_preserved, 0.0);
  EXPECT_EQ(compute_features(src, split_ws("which money does japan use"), ents).ne_preserved, 0.0);
  EXPECT_THROW(compute_features(src, src, {{5, 9}}), Error);
}

TEST(Features, EmptySentence) {
  try {
    compute_features({}, {"x"}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptySentence);
  }
  EXPECT_THROW(compute_features({"x"}, {}, {}), Error);
}

TEST(Features, ValuesAreFiniteAndBounded) {
  for (const auto& p : bundled_pairs()) {
    auto f = compute_features(p.source, p.candidate, {});
    for (double v : f.values()) EXPECT_TRUE(std::isfinite(v));
    for (double v : {f.bleu1, f.bleu2, f.bleu3, f.bleu4, f.unigram_precision, f.unigram_recall}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_GE(f.ter, 0.0);
    EXPECT_LE(f.ter, 2.0);
  }
}

TEST(Gazetteer, LongestMatchFirst) {
  Gazetteer g({"czech", "czech republic", "peru"});
  EXPECT_EQ(g.tag(split_ws("what do people in Czech Republic speak")), (std::vector<EntitySpan>{{4, 6}}));
  EXPECT_EQ(g.tag(split_ws("peru and czech")), (std::vector<EntitySpan>{{0, 1}, {2, 3}}));
  EXPECT_TRUE(g.tag(split_ws("nothing here")).empty());
}

TEST(Train, SeparablePoints) {
  std::vector<LabeledPair> pairs = {{split_ws("a b c d"), split_ws("a b c d"), 1},
                                    {split_ws("a b c d"), split_ws("x y"), 0}};
  auto m = train_classifier(pairs, 1);
  for (const auto& p : pairs) {
    double s = m.score(compute_features(p.source, p.candidate, {}));
    EXPECT_EQ(s >= m.threshold, p.label == 1);
  }
}

TEST(Train, DuplicationGivesIdenticalModel) {
  auto pairs = bundled_pairs();
  auto doubled = pairs;
  doubled.insert(doubled.end(), pairs.begin(), pairs.end());
  EXPECT_EQ(train_classifier(pairs, 3), train_classifier(doubled, 3));
}

TEST(Train, DeterministicGivenSeed) {
  auto pairs = bundled_pairs();
  EXPECT_EQ(serialize(train_classifier(pairs, 5)), serialize(train_classifier(pairs, 5)));
  auto shuffled = pairs;
  std::mt19937_64 rng(1);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  EXPECT_EQ(train_classifier(pairs, 5), train_classifier(shuffled, 5));
}

TEST(Train, DegenerateLabels) {
  std::vector<LabeledPair> pairs = {{{"a"}, {"a"}, 1}, {{"b"}, {"b"}, 1}};
  try {
    train_classifier(pairs, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DegenerateLabels);
  }
}

TEST(Train, PaperClassRatio) {
  auto pairs = bundled_pairs();
  int pos = 0;
  for (const auto& p : pairs) pos += p.label;
  EXPECT_EQ(pos, 154);
  EXPECT_EQ(pairs.size(), 1000u);
  auto m = train_classifier(pairs, 1);
  EXPECT_GT(m.threshold, 0.0);
  EXPECT_LT(m.threshold, 1.0);
  double tp = 0, fp = 0, fn = 0;
  for (const auto& p : read_labeled_pairs(testing_support::data_path("classifier/test.tsv"))) {
    bool pred = m.score(compute_features(p.source, p.candidate, {})) >= m.threshold;
    tp += pred && p.label;
    fp += pred && !p.label;
    fn += !pred && p.label;
  }
  // The all-negative baseline has positive-class F1 of zero.
  EXPECT_GT(2 * tp / (2 * tp + fp + fn), 0.0);
}

TEST(Model, SerializationRoundTrip) {
  auto m = train_classifier(bundled_pairs(), 2);
  auto text = serialize(m);
  EXPECT_EQ(deserialize_classifier(text), m);
  EXPECT_THROW(deserialize_classifier("BIAS\t0\n"), Error);
  EXPECT_THROW(deserialize_classifier(text + "FEATURE\tmeteor\t1\n"), Error);
}

TEST(Filter, EmptyListAndZeroThreshold) {
  auto m = train_classifier(bundled_pairs(), 2);
  Tokens src = split_ws("what is the capital of peru");
  EXPECT_TRUE(filter_candidates(m, src, {}, {}).empty());
  m.threshold = 0.0;
  auto cands = candidates({"what city is the capital of peru", "peru capital", "which is the capital of peru"});
  auto out = filter_candidates(m, src, cands, {});
  ASSERT_EQ(out.size(), 3u);
  for (std::size_t i = 1; i < out.size(); ++i) EXPECT_GE(out[i - 1].score, out[i].score);
}

TEST(Filter, IdentityCandidateScore) {
  auto m = train_classifier(bundled_pairs(), 2);
  Tokens src = split_ws("what is the capital of peru");
  auto out = filter_candidates(m, src, candidates({"what is the capital of peru"}), {});
  double s = m.score(compute_features(src, src, {}));
  if (s >= m.threshold) {
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].score, s);
  } else {
    EXPECT_TRUE(out.empty());
  }
}

TEST(FilterProperties, PermutationDoesNotChangeScores) {
  auto m = train_classifier(bundled_pairs(), 2);
  m.threshold = 0.0;
  Tokens src = split_ws("what language is spoken in peru");
  auto cands = candidates({"what language do people in peru speak", "peru language", "what is spoken in peru",
                           "which language is spoken in peru", "language spoken peru what"});
  auto a = filter_candidates(m, src, cands, {});
  std::reverse(cands.begin(), cands.end());
  auto b = filter_candidates(m, src, cands, {});
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].tokens, b[i].tokens);
    EXPECT_EQ(a[i].score, b[i].score);
  }
}

// On data where keeping the entity goes with the positive label, the learned
// entity weight is positive and flipping the bit moves the logit by exactly
// that weight.
TEST(ClassifierProperties, EntityMonotonicity) {
  std::vector<LabeledPair> pairs;
  const std::vector<std::string> places = {"peru", "chile", "india", "japan", "kenya", "italy"};
  Gazetteer gaz(places);
  for (const auto& a : places)
    for (const auto& b : places) {
      Tokens src = split_ws("what is the capital of " + a);
      pairs.push_back({src, split_ws("what city is the capital of " + a), 1});
      if (a != b) pairs.push_back({src, split_ws("what city is the capital of " + b), 0});
    }
  auto m = train_classifier(pairs, 4, &gaz);
  const std::size_t ne = kNumPairFeatures - 1;
  EXPECT_GT(m.weights[ne], 0.0);
  PairFeatures f = compute_features(split_ws("what is the capital of peru"), split_ws("what city is the capital of chile"),
                                    gaz.tag(split_ws("what is the capital of peru")));
  EXPECT_EQ(f.ne_preserved, 0.0);
  double before = m.logit(f);
  f.ne_preserved = 1.0;
  EXPECT_NEAR(m.logit(f) - before, m.weights[ne], 1e-12);
  EXPECT_GT(m.score(f), 1.0 / (1.0 + std::exp(-before)));
}
