// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <numeric>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rlsr/errors.hpp"
#include "rlsr/repetition.hpp"

namespace rlsr::repetition {
namespace {

std::string repeat(std::string_view unit, std::size_t times) {
  std::string out;
  for (std::size_t i = 0; i < times; ++i) out += unit;
  return out;
}

TEST(Lrs, Examples) {
  EXPECT_EQ(longest_repeated_substring("abcd").length, 0u);
  EXPECT_EQ(longest_repeated_substring("").length, 0u);
  const std::string s = "abcabc";
  const auto r = longest_repeated_substring(s);
  EXPECT_EQ(r.length, 3u);
  EXPECT_EQ(s.substr(r.first, 3), "abc");
  EXPECT_EQ(s.substr(r.second, 3), "abc");
  EXPECT_NE(r.first, r.second);
  EXPECT_EQ(longest_repeated_substring(repeat("ab", 200)).length, 398u);
  EXPECT_EQ(longest_repeated_substring("aaaa").length, 3u);
  EXPECT_EQ(longest_repeated_substring("banana").length, 3u);
}

TEST(Lrs, NonOverlappingVariant) {
  EXPECT_EQ(longest_repeated_substring_non_overlapping("aaaa").length, 2u);
  EXPECT_EQ(longest_repeated_substring_non_overlapping("banana").length, 2u);
  EXPECT_EQ(longest_repeated_substring_non_overlapping(repeat("ab", 200)).length, 200u);
  const std::string s = "xyzqxyz";
  const auto r = longest_repeated_substring_non_overlapping(s);
  EXPECT_EQ(r.length, 3u);
  EXPECT_GE(std::max(r.first, r.second) - std::min(r.first, r.second), 3u);
}

TEST(Lrs, MatchesBruteForceOnRandomStrings) {
  CounterRng rng(21, 0);
  for (std::size_t alphabet : {2u, 4u, 26u, 256u}) {
    for (int i = 0; i < 60; ++i) {
      const auto s = testing::random_string(rng, rng.below(80), alphabet);
      const auto fast = longest_repeated_substring(s);
      ASSERT_EQ(fast.length, testing::brute_force_lrs(s)) << s;
      if (fast.length > 0) ASSERT_EQ(s.compare(fast.first, fast.length, s, fast.second, fast.length), 0);
      ASSERT_EQ(longest_repeated_substring_non_overlapping(s).length,
                testing::brute_force_lrs(s, true))
          << s;
    }
  }
}

TEST(SuffixArray, IsSortedPermutationWithCorrectLcp) {
  CounterRng rng(22, 0);
  for (int i = 0; i < 50; ++i) {
    const auto s = testing::random_string(rng, 1 + rng.below(60), 3);
    const auto sa = suffix_array(s);
    std::vector<std::size_t> sorted = sa;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::size_t> iota(s.size());
    std::iota(iota.begin(), iota.end(), 0);
    ASSERT_EQ(sorted, iota);
    for (std::size_t k = 1; k < sa.size(); ++k) {
      ASSERT_LT(std::string_view(s).substr(sa[k - 1]), std::string_view(s).substr(sa[k]));
    }
    const auto lcp = lcp_array(s, sa);
    for (std::size_t k = 1; k < sa.size(); ++k) {
      std::size_t l = 0;
      while (sa[k - 1] + l < s.size() && sa[k] + l < s.size() && s[sa[k - 1] + l] == s[sa[k] + l]) ++l;
      ASSERT_EQ(lcp[k], l);
    }
  }
}

TEST(PenaltyRule, StrictThresholds) {
  EXPECT_TRUE(penalty_rule(398, 100));
  EXPECT_FALSE(penalty_rule(50, 100));
  EXPECT_FALSE(penalty_rule(150, 2000));
  EXPECT_FALSE(penalty_rule(100, 50));    // length must exceed 100
  EXPECT_TRUE(penalty_rule(101, 1000));   // 0.101 > 0.1
  EXPECT_FALSE(penalty_rule(101, 1010));  // 0.1 is not above 0.1
  EXPECT_THROW(penalty_rule(10, 0), ContractError);
}

TEST(PenaltyRule, DecisionCarriesWitness) {
  const auto d = repetition_penalty(repeat("ab", 200), std::string(100, 'x'));
  EXPECT_TRUE(d.triggered);
  EXPECT_EQ(d.lrs.length, 398u);
  PenaltyConfig cfg;
  cfg.non_overlapping = true;
  EXPECT_EQ(repetition_penalty(repeat("ab", 200), std::string(100, 'x'), cfg).lrs.length, 200u);
}

}  // namespace
}  // namespace rlsr::repetition
