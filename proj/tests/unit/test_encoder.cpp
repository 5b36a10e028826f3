// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <map>
#include <numeric>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rlsr/dataset.hpp"
#include "rlsr/encoder.hpp"
#include "rlsr/errors.hpp"

namespace rlsr::embed {
namespace {

double norm(const EmbeddingVector& v) {
  return std::sqrt(std::inner_product(v.values.begin(), v.values.end(), v.values.begin(), 0.0));
}

TEST(Encoder, EmptyTextIsFlaggedZero) {
  const auto v = embed("", {});
  EXPECT_TRUE(v.empty);
  EXPECT_EQ(v.values, std::vector<double>(256, 0.0));
}

TEST(Encoder, UnitNorm) {
  CounterRng rng(1, 0);
  for (int i = 0; i < 200; ++i) {
    const auto s = testing::random_string(rng, 1 + rng.below(300), 256);
    EXPECT_NEAR(norm(embed(s, {})), 1.0, 1e-9);
  }
}

TEST(Encoder, Deterministic) {
  EXPECT_EQ(embed("abab", {}).values, embed("abab", {}).values);
  HashedNgramEncoder enc({});
  EXPECT_EQ(enc.encode("hello world").values, embed("hello world", {}).values);
}

TEST(Encoder, UnigramsIgnoreOrder) {
  EncoderConfig cfg;
  cfg.orders = {1};
  EXPECT_EQ(embed("cat dog", cfg).values, embed("dog cat", cfg).values);
  cfg.orders = {1, 2, 3};
  EXPECT_NE(embed("cat dog", cfg).values, embed("dog cat", cfg).values);
}

TEST(Encoder, FeatureWeightsMatchBruteForceCounts) {
  EncoderConfig cfg;
  cfg.tf = TfMode::kRaw;
  cfg.dim = 64;
  const std::string text = "the cat sat on the mat";
  std::vector<double> expected(cfg.dim, 0.0);
  for (int n : cfg.orders)
    for (std::size_t i = 0; i + n <= text.size(); ++i)
      expected[(fnv1a(text.substr(i, n)) ^ cfg.hash_seed) % cfg.dim] += 1.0;
  EXPECT_EQ(feature_weights(text, cfg), expected);

  cfg.tf = TfMode::kSublinear;
  for (auto& w : expected)
    if (w > 0) w = 1.0 + std::log(w);
  const auto got = feature_weights(text, cfg);
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(got[i], expected[i], 1e-15);
}

TEST(Encoder, Fnv1aKnownValues) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Encoder, TruncationKeepsPrefix) {
  EncoderConfig cfg;
  cfg.truncate = 4;
  EXPECT_EQ(embed("abcdXYZ", cfg).values, embed("abcd", cfg).values);
}

TEST(Encoder, InvalidConfigRaises) {
  EncoderConfig cfg;
  cfg.dim = 4;
  EXPECT_THROW(cfg.validate(), ContractError);
  cfg.dim = 16;
  cfg.orders = {0};
  EXPECT_THROW(embed("x", cfg), ContractError);
}

TEST(Cosine, HandExamples) {
  const auto v = embed("some text", {});
  EXPECT_NEAR(cosine(v, v), 1.0, 1e-9);
  const EmbeddingVector x{{1.0, 0.0}, false}, y{{0.0, 1.0}, false};
  const EmbeddingVector d{{1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)}, false};
  EXPECT_EQ(cosine(x, y), 0.0);
  EXPECT_NEAR(cosine(x, d), 0.70710678, 1e-8);
  EXPECT_EQ(cosine(embed("", {}), v), 0.0);
  EXPECT_THROW(cosine(x, v), DimensionError);
}

TEST(Cosine, KeywordPermutationsStaySimilar) {
  // Reordered keyword answers keep most n-gram mass, which is what makes the
  // keywords task order-tolerant under this reward.
  const auto ds = data::generate_task({.kind = data::TaskKind::kKeywords, .n = 200, .seed = 9});
  CounterRng rng(3, 0);
  double worst = 1.0;
  for (const auto& s : ds.samples) {
    auto words = data::marked_words(data::payload_of(s.prompt));
    for (std::size_t i = words.size(); i > 1; --i) std::swap(words[i - 1], words[rng.below(i)]);
    std::string permuted;
    for (const auto& w : words) permuted += (permuted.empty() ? "" : " ") + w;
    worst = std::min(worst, cosine(embed(permuted, {}), embed(s.response, {})));
  }
  EXPECT_GE(worst, 0.6);
}

}  // namespace
}  // namespace rlsr::embed
