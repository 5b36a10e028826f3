// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#include "rlsr/repetition.hpp"

#include <algorithm>

#include "rlsr/errors.hpp"

namespace rlsr::repetition {

std::vector<std::size_t> suffix_array(std::string_view text) {
  const std::size_t n = text.size();
  std::vector<std::size_t> sa(n), rank(n), tmp(n), key(n);
  if (n == 0) return sa;
  for (std::size_t i = 0; i < n; ++i) {
    sa[i] = i;
    rank[i] = static_cast<unsigned char>(text[i]) + 1;
  }
  // Ranks are >= 1; 0 marks "past the end" for the second key.
  std::size_t classes = 257;
  std::vector<std::size_t> count;
  auto radix_pass = [&](const std::vector<std::size_t>& in, std::vector<std::size_t>& out,
                        auto key_of) {
    count.assign(classes + 1, 0);
    for (std::size_t i : in) ++count[key_of(i)];
    std::size_t total = 0;
    for (auto& c : count) {
      const auto cur = c;
      c = total;
      total += cur;
    }
    for (std::size_t i : in) out[count[key_of(i)]++] = i;
  };
  for (std::size_t k = 1;; k <<= 1) {
    auto second = [&](std::size_t i) { return i + k < n ? rank[i + k] : 0; };
    auto first = [&](std::size_t i) { return rank[i]; };
    radix_pass(sa, tmp, second);
    radix_pass(tmp, sa, first);
    key[sa[0]] = 1;
    for (std::size_t i = 1; i < n; ++i) {
      const bool same = first(sa[i]) == first(sa[i - 1]) && second(sa[i]) == second(sa[i - 1]);
      key[sa[i]] = key[sa[i - 1]] + (same ? 0 : 1);
    }
    rank.swap(key);
    classes = rank[sa[n - 1]];
    if (classes == n) break;
    if (k >= n) break;
  }
  return sa;
}

std::vector<std::size_t> lcp_array(std::string_view text, const std::vector<std::size_t>& sa) {
  const std::size_t n = text.size();
  std::vector<std::size_t> inv(n), lcp(n, 0);
  for (std::size_t i = 0; i < n; ++i) inv[sa[i]] = i;
  std::size_t h = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (inv[i] == 0) {
      h = 0;
      continue;
    }
    const std::size_t j = sa[inv[i] - 1];
    while (i + h < n && j + h < n && text[i + h] == text[j + h]) ++h;
    lcp[inv[i]] = h;
    if (h > 0) --h;
  }
  return lcp;
}

LrsResult longest_repeated_substring(std::string_view text) {
  LrsResult best;
  if (text.size() < 2) return best;
  const auto sa = suffix_array(text);
  const auto lcp = lcp_array(text, sa);
  for (std::size_t i = 1; i < sa.size(); ++i) {
    if (lcp[i] > best.length) {
      best.length = lcp[i];
      best.first = std::min(sa[i - 1], sa[i]);
      best.second = std::max(sa[i - 1], sa[i]);
    }
  }
  return best;
}

LrsResult longest_repeated_substring_non_overlapping(std::string_view text) {
  LrsResult best;
  const std::size_t n = text.size();
  if (n < 2) return best;
  const auto sa = suffix_array(text);
  const auto lcp = lcp_array(text, sa);
  // Feasible(L): some run of suffixes with pairwise LCP >= L spans positions
  // at least L apart. Feasibility is monotone in L, so binary search.
  auto feasible = [&](std::size_t L, LrsResult& witness) {
    std::size_t lo = sa[0], hi = sa[0];
    for (std::size_t i = 1; i <= n; ++i) {
      if (i == n || lcp[i] < L) {
        if (hi - lo >= L) {
          witness = {L, lo, hi};
          return true;
        }
        if (i < n) lo = hi = sa[i];
      } else {
        lo = std::min(lo, sa[i]);
        hi = std::max(hi, sa[i]);
      }
    }
    return false;
  };
  std::size_t lo = 1, hi = n / 2;
  while (lo <= hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    LrsResult w;
    if (feasible(mid, w)) {
      best = w;
      lo = mid + 1;
    } else {
      hi = mid - 1;
    }
  }
  return best;
}

bool penalty_rule(std::size_t lrs_length, std::size_t reference_length, const PenaltyConfig& cfg) {
  if (reference_length == 0) throw ContractError("repetition penalty needs a non-empty reference");
  const double ratio = static_cast<double>(lrs_length) / static_cast<double>(reference_length);
  return lrs_length > cfg.min_length && ratio > cfg.min_ratio;
}

PenaltyDecision repetition_penalty(std::string_view response, std::string_view reference,
                                   const PenaltyConfig& cfg) {
  if (reference.empty()) throw ContractError("repetition penalty needs a non-empty reference");
  PenaltyDecision d;
  d.lrs = cfg.non_overlapping ? longest_repeated_substring_non_overlapping(response)
                              : longest_repeated_substring(response);
  d.triggered = penalty_rule(d.lrs.length, reference.size(), cfg);
  return d;
}

}  // namespace rlsr::repetition
