// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "rlsr/dataset.hpp"
#include "rlsr/policy.hpp"
#include "rlsr/reward.hpp"

namespace rlsr::eval {

struct EvalOptions {
  // Greedy decoding by default; sampled decoding uses seed and temperature.
  bool greedy = true;
  double temperature = 1.0;
  std::size_t max_new_tokens = 128;
  std::uint64_t seed = 0;
  reward::RewardConfig reward;
  // 0 picks std::thread::hardware_concurrency().
  std::size_t threads = 0;
};

struct EvalReport {
  std::size_t count = 0;
  double mean_reward = 0.0;
  double mean_cosine = 0.0;
  double exact_match = 0.0;
  double penalty_rate = 0.0;
  // Response lengths in bytes.
  double mean_len = 0.0;
  double p50_len = 0.0;
  double p90_len = 0.0;
  std::vector<double> rewards;

  bool operator==(const EvalReport&) const = default;
};

struct CompareReport {
  std::size_t count = 0;
  double win_a = 0.0;
  double win_b = 0.0;
  double ties = 0.0;
  std::vector<double> rewards_a;
  std::vector<double> rewards_b;
};

// Maps the i-th sample of a dataset to a response text.
using Generator = std::function<std::string(const data::Sample& sample, std::size_t index)>;

EvalReport evaluate(const data::Dataset& dataset, const Generator& generate,
                    const EvalOptions& opts);
EvalReport evaluate(const policy::Policy& policy, const data::Dataset& dataset,
                    const EvalOptions& opts);

// Responses the policy produces for each prompt, decoded to text.
std::vector<std::string> generate_all(const policy::Policy& policy, const data::Dataset& dataset,
                                      const EvalOptions& opts);

// Throws UsageError when the two vocabularies differ.
CompareReport compare(const policy::Policy& a, const policy::Policy& b,
                      const data::Dataset& dataset, const EvalOptions& opts);

std::string to_json(const EvalReport& report);
std::string to_json(const CompareReport& report);

// Appends one row, writing the header first when the file is new.
void append_csv(const std::filesystem::path& path, const std::string& label,
                const EvalReport& report);

}  // namespace rlsr::eval
