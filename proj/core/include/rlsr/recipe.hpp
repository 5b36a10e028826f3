// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rlsr/dataset.hpp"
#include "rlsr/eval.hpp"
#include "rlsr/trainer.hpp"

namespace rlsr::recipe {

struct Stage {
  std::string name;
  train::Mode mode = train::Mode::kSft;
  // Name of an earlier stage whose final weights seed this one; empty means
  // random initialization.
  std::string init;
  // Flat TrainConfig JSON applied on top of the mode defaults. The seed key
  // is overwritten by the recipe seed.
  std::string config_json = "{}";
  // When set the stage always trains with this seed and runs once; every
  // recipe seed reuses its result.
  std::optional<std::uint64_t> fixed_seed;
};

// Metrics available to an envelope check:
//   mean_reward, mean_cosine, exact_match, penalty_rate, mean_len (held-out eval)
//   step0_kl, final_kl (training CSV; final_kl averages the last 10 steps)
//   reward_dip (largest relative drop of the periodic held-out reward below its
//               running maximum within the trailing window)
struct Check {
  std::string stage;
  std::string metric;
  std::string cmp;  // >=, <=, >, <
  std::optional<double> threshold;
  // Compare against the same metric of another stage instead of a threshold.
  std::string other_stage;
};

struct Recipe {
  std::string name;
  std::string description;
  std::vector<std::uint64_t> seeds{0};
  std::size_t min_passing_seeds = 1;
  data::GeneratorSpec data;
  double held_out_fraction = 0.1;
  // Cap on held-out prompts used for evaluation; 0 keeps all.
  std::size_t eval_limit = 0;
  std::size_t eval_max_new_tokens = 128;
  // Steps covered by reward_dip.
  std::size_t dip_window = 500;
  std::vector<Stage> stages;
  std::vector<Check> envelope;
  double max_wall_seconds = 0.0;  // 0 disables the limit
};

Recipe parse_recipe(const std::string& json_text);
Recipe load_recipe(const std::filesystem::path& path);
// Looks for <dir>/<name>.json in order and throws UsageError if none exists.
std::filesystem::path find_recipe(const std::string& name,
                                  const std::vector<std::filesystem::path>& dirs);

struct StageResult {
  std::string name;
  eval::EvalReport report;
  std::vector<train::StepMetrics> metrics;
  // (step, held-out mean reward) for each intermediate checkpoint and the end.
  std::vector<std::pair<std::size_t, double>> reward_curve;
  std::filesystem::path out_dir;
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<StageResult> stages;
  std::vector<std::string> failures;
  bool passed() const { return failures.empty(); }
  const StageResult* stage(const std::string& name) const;
};

struct RecipeResult {
  std::string name;
  std::vector<SeedResult> seeds;
  std::vector<std::string> failures;
  double wall_seconds = 0.0;
  bool passed = false;
};

double metric_value(const StageResult& stage, const std::string& metric, std::size_t dip_window);

// Runs every stage for every seed, writes each stage's checkpoints and CSVs
// under <out_dir>/seed-<s>/<stage>/ plus <out_dir>/eval.csv and summary.json.
RecipeResult run_recipe(const Recipe& recipe, const std::filesystem::path& out_dir);

}  // namespace rlsr::recipe
