// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#include "rlsr/reward.hpp"

#include <algorithm>

#include "rlsr/errors.hpp"

namespace rlsr::reward {
namespace {

constexpr char kPromptJoin = '\x1f';

std::string with_prompt(std::string_view prompt, std::string_view text) {
  std::string s;
  s.reserve(prompt.size() + 1 + text.size());
  s.append(prompt);
  s.push_back(kPromptJoin);
  s.append(text);
  return s;
}

}  // namespace

void RewardConfig::validate() const {
  encoder.validate();
  if (!(penalty_value < 0.0 && penalty_value >= -1.0)) {
    throw ContractError("penalty value must lie in [-1, 0) to rank below every cosine score");
  }
}

RewardScorer::RewardScorer(RewardConfig cfg)
    : RewardScorer(cfg, std::make_shared<embed::HashedNgramEncoder>(cfg.encoder)) {}

RewardScorer::RewardScorer(RewardConfig cfg, std::shared_ptr<const embed::TextEncoder> encoder)
    : cfg_(std::move(cfg)), encoder_(std::move(encoder)) {
  cfg_.validate();
  if (!encoder_) throw ContractError("reward scorer needs an encoder");
}

RewardBreakdown RewardScorer::score(std::string_view prompt, std::string_view response,
                                    std::string_view reference) const {
  if (reference.empty()) throw ContractError("score: reference must be non-empty");
  RewardBreakdown out;
  const auto decision = repetition::repetition_penalty(response, reference, cfg_.penalty);
  out.penalty_triggered = decision.triggered;
  out.lrs_length = decision.lrs.length;
  if (cfg_.embed_with_prompt) {
    out.cosine = embed::cosine(encoder_->encode(with_prompt(prompt, response)),
                               encoder_->encode(with_prompt(prompt, reference)));
  } else {
    out.cosine = embed::cosine(encoder_->encode(response), encoder_->encode(reference));
  }
  if (!out.penalty_triggered) {
    out.final_reward = out.cosine;
  } else if (cfg_.penalty_mode == PenaltyMode::kReplace) {
    out.final_reward = cfg_.penalty_value;
  } else {
    out.final_reward = std::max(-1.0, out.cosine + cfg_.penalty_value);
  }
  return out;
}

std::vector<RewardBreakdown> RewardScorer::score_group(std::string_view prompt,
                                                       std::span<const std::string> responses,
                                                       std::string_view reference) const {
  if (responses.empty()) throw ContractError("score_group: empty response list");
  std::vector<RewardBreakdown> out;
  out.reserve(responses.size());
  for (const auto& r : responses) out.push_back(score(prompt, r, reference));
  return out;
}

RewardBreakdown score(std::string_view prompt, std::string_view response,
                      std::string_view reference, const RewardConfig& cfg) {
  return RewardScorer(cfg).score(prompt, response, reference);
}

std::vector<RewardBreakdown> score_group(std::string_view prompt,
                                         std::span<const std::string> responses,
                                         std::string_view reference, const RewardConfig& cfg) {
  return RewardScorer(cfg).score_group(prompt, responses, reference);
}

}  // namespace rlsr::reward
