// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rlsr/encoder.hpp"
#include "rlsr/repetition.hpp"

namespace rlsr::reward {

enum class PenaltyMode {
  // Final reward becomes the penalty value.
  kReplace,
  // Penalty value is added to the cosine (ablation).
  kAdditive,
};

struct RewardConfig {
  embed::EncoderConfig encoder;
  repetition::PenaltyConfig penalty;
  double penalty_value = -1.0;
  PenaltyMode penalty_mode = PenaltyMode::kReplace;
  // Embed "prompt \x1f response" and "prompt \x1f reference" instead of the
  // bare texts.
  bool embed_with_prompt = false;

  // penalty_value must lie in [-1, 0) so penalised responses rank last.
  void validate() const;
};

struct RewardBreakdown {
  double cosine = 0.0;
  bool penalty_triggered = false;
  std::size_t lrs_length = 0;
  double final_reward = 0.0;

  bool operator==(const RewardBreakdown&) const = default;
};

/// Supervised reward: embedding cosine between response and reference, with
/// the repetition rule overriding it. Stateless; safe to share across threads.
class RewardScorer {
 public:
  explicit RewardScorer(RewardConfig cfg);
  // Any encoder may replace the hashed n-gram default.
  RewardScorer(RewardConfig cfg, std::shared_ptr<const embed::TextEncoder> encoder);

  // Throws ContractError on an empty reference.
  RewardBreakdown score(std::string_view prompt, std::string_view response,
                        std::string_view reference) const;
  std::vector<RewardBreakdown> score_group(std::string_view prompt,
                                           std::span<const std::string> responses,
                                           std::string_view reference) const;

  const RewardConfig& config() const { return cfg_; }

 private:
  RewardConfig cfg_;
  std::shared_ptr<const embed::TextEncoder> encoder_;
};

// Free-function forms.
RewardBreakdown score(std::string_view prompt, std::string_view response,
                      std::string_view reference, const RewardConfig& cfg);
std::vector<RewardBreakdown> score_group(std::string_view prompt,
                                         std::span<const std::string> responses,
                                         std::string_view reference, const RewardConfig& cfg);

}  // namespace rlsr::reward
