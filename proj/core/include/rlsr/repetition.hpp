// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace rlsr::repetition {

struct LrsResult {
  // Length in bytes of the longest substring occurring at least twice.
  std::size_t length = 0;
  // Start offsets of two occurrences, first < second. Both 0 when length == 0.
  std::size_t first = 0;
  std::size_t second = 0;
};

// Suffix array by prefix doubling with radix passes, O(n log n).
std::vector<std::size_t> suffix_array(std::string_view text);
// Kasai LCP: lcp[i] is the common prefix of suffixes sa[i-1] and sa[i]; lcp[0] = 0.
std::vector<std::size_t> lcp_array(std::string_view text, const std::vector<std::size_t>& sa);

// Occurrences may overlap ("aaa" has a repeated "aa").
LrsResult longest_repeated_substring(std::string_view text);
// Occurrences must not overlap: first + length <= second.
LrsResult longest_repeated_substring_non_overlapping(std::string_view text);

struct PenaltyConfig {
  // Both comparisons are strict.
  std::size_t min_length = 100;
  double min_ratio = 0.1;
  bool non_overlapping = false;
};

struct PenaltyDecision {
  bool triggered = false;
  LrsResult lrs;
};

// Pure threshold rule on (lrs length, reference length).
bool penalty_rule(std::size_t lrs_length, std::size_t reference_length,
                  const PenaltyConfig& cfg = {});

// Throws ContractError when the reference is empty.
PenaltyDecision repetition_penalty(std::string_view response, std::string_view reference,
                                   const PenaltyConfig& cfg = {});

}  // namespace rlsr::repetition
