// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rlsr/adamw.hpp"
#include "rlsr/checkpoint.hpp"
#include "rlsr/dataset.hpp"
#include "rlsr/policy.hpp"
#include "rlsr/reward.hpp"

namespace rlsr::train {

enum class Mode { kSft, kRlsr };
enum class AdvantageNorm { kMeanOnly, kMeanStd };
enum class LrSchedule { kConstant, kCosine };
enum class KlEstimator {
  // log pi_old - log pi_ref on the sampled token, subtracted from that
  // token's advantage inside the clipped surrogate.
  kK1,
  // exp(log pi_ref - log pi) - (log pi_ref - log pi) - 1, added to the loss
  // and differentiated directly.
  kK3,
};

/// Training hyperparameters. Desk-scale defaults; the values used for
/// billion-parameter models are noted next to each field.
struct TrainConfig {
  Mode mode = Mode::kSft;
  // sft 3e-4, rlsr 3e-5 (large-model runs: sft 3e-5, rlsr 1e-6 to 3e-6).
  double lr = 3e-4;
  // Linear warmup over the first warmup_steps steps, then constant or cosine
  // decay to zero at max_steps.
  std::size_t warmup_steps = 0;
  LrSchedule lr_schedule = LrSchedule::kConstant;
  // sft 32 samples, rlsr 16 prompts (large-model runs: 256 and 1024).
  std::size_t batch_size = 32;
  // Rollouts per prompt.
  std::size_t group_size = 8;
  double kl_coef = 0.001;
  double clip_eps = 0.2;
  AdvantageNorm adv_norm = AdvantageNorm::kMeanStd;
  // PPO mini-batch as a fraction of one rollout batch (256 / 1024).
  double minibatch_frac = 0.25;
  double temperature = 1.0;
  std::size_t max_new_tokens = 128;
  std::size_t max_steps = 100;
  // Checkpoint cadence in steps; 0 writes only the final checkpoint.
  std::size_t eval_interval = 0;
  std::uint64_t seed = 0;
  KlEstimator kl_estimator = KlEstimator::kK1;
  double weight_decay = 0.0;
  // Global gradient-norm clip; 0 disables.
  double grad_clip = 1.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  // Argmax rollouts, so every group holds G identical responses.
  bool greedy_rollouts = false;

  // Architecture used when training starts from random weights.
  policy::PolicyConfig policy;
  double init_std = 0.02;

  reward::RewardConfig reward;

  static TrainConfig defaults(Mode mode);
  void validate() const;
};

std::string_view mode_name(Mode mode);

// Learning rate used for the optimizer updates of 0-based step `step`.
double scheduled_lr(const TrainConfig& cfg, std::size_t step);
Mode parse_mode(std::string_view name);

// Flat JSON object with every key.
std::string to_json(const TrainConfig& cfg);
// Applies the keys present in `json_text` on top of `base`. Unknown keys and
// wrongly typed values raise UsageError.
TrainConfig apply_json(const TrainConfig& base, std::string_view json_text);

struct StepMetrics {
  std::size_t step = 0;
  double mean_reward = 0.0;
  double mean_cosine = 0.0;
  double penalty_rate = 0.0;
  double mean_kl = 0.0;
  double entropy = 0.0;
  double loss = 0.0;
  double mean_len = 0.0;
  double wall_ms = 0.0;
  bool aborted = false;
  // Over-length samples dropped from an sft batch.
  std::size_t skipped = 0;
  // Optimizer updates applied during the step.
  std::size_t updates = 0;
};

// step,mean_reward,mean_cosine,penalty_rate,mean_kl,entropy,loss,mean_len,wall_ms
std::string metrics_csv_header();
// Floats use 9 significant digits.
std::string metrics_csv_row(const StepMetrics& m);

// mean-only: r_i - mean(r). mean-std: (r_i - mean(r)) / (std(r) + 1e-8) with
// the population std. A group of equal rewards yields exact zeros.
std::vector<double> compute_group_advantages(std::span<const double> rewards,
                                             AdvantageNorm mode);

/// One prompt's sampled responses with everything the policy update needs.
struct RolloutGroup {
  data::TokenIds prompt;
  std::vector<data::TokenIds> responses;
  std::vector<std::vector<double>> old_log_probs;
  std::vector<std::vector<double>> ref_log_probs;
  std::vector<reward::RewardBreakdown> rewards;
  std::vector<double> advantages;
  std::vector<bool> truncated;
  // Mean token entropy of the sampling policy per response.
  std::vector<double> entropy;
};

// A single response as seen by the PPO loss.
struct RolloutView {
  std::span<const int> prompt;
  std::span<const int> response;
  std::span<const double> old_log_probs;
  std::span<const double> ref_log_probs;
  double advantage = 0.0;
};

struct LossStats {
  double loss = 0.0;
  // max |ratio - 1| over every token in the batch.
  double max_ratio_deviation = 0.0;
  std::size_t tokens = 0;
};

// Mean over samples of the token-averaged negative log-likelihood of the
// response (prompt positions masked). With accumulate_grad the gradient is
// added to the policy's parameter gradients.
LossStats sft_loss(policy::Policy& policy, std::span<const data::Sample> batch,
                   bool accumulate_grad);

// Mean over responses of the token-averaged clipped surrogate
// -min(rho A_t, clip(rho, 1-eps, 1+eps) A_t), rho = exp(logp - old). With k1,
// A_t = A - beta (old - ref); with k3, A_t = A and beta k3 is added.
LossStats ppo_loss(policy::Policy& policy, std::span<const RolloutView> batch,
                   const TrainConfig& cfg, bool accumulate_grad);

class SftTrainer {
 public:
  SftTrainer(policy::Policy& policy, const TrainConfig& cfg);

  StepMetrics step(std::span<const data::Sample> batch);

  ad::OptimizerState& optimizer() { return opt_; }
  std::size_t steps_taken() const { return step_; }

 private:
  policy::Policy& policy_;
  TrainConfig cfg_;
  ad::OptimizerState opt_;
  std::size_t step_ = 0;
};

struct RlsrDiagnostics {
  // max |ratio - 1| on the first mini-batch of the latest step.
  double first_minibatch_ratio_deviation = 0.0;
  std::size_t updates = 0;
  // Mini-batches whose gradient was identically zero.
  std::size_t skipped_updates = 0;
  std::size_t aborted_steps = 0;
};

class RlsrTrainer {
 public:
  RlsrTrainer(policy::Policy& policy, policy::PolicySnapshot reference, const TrainConfig& cfg);

  StepMetrics step(std::span<const data::Sample> prompts);

  // Samples and scores one group with the current weights.
  RolloutGroup collect(const data::Sample& sample, std::uint64_t seed) const;

  ad::OptimizerState& optimizer() { return opt_; }
  const RlsrDiagnostics& diagnostics() const { return diag_; }
  const std::vector<RolloutGroup>& last_rollouts() const { return last_; }
  std::size_t steps_taken() const { return step_; }

 private:
  policy::Policy& policy_;
  policy::PolicySnapshot reference_;
  TrainConfig cfg_;
  reward::RewardScorer scorer_;
  ad::OptimizerState opt_;
  RlsrDiagnostics diag_;
  std::vector<RolloutGroup> last_;
  std::size_t step_ = 0;
};

struct TrainResult {
  policy::Policy policy;
  ad::OptimizerState optimizer;
  std::vector<StepMetrics> metrics;
  std::vector<std::uint64_t> seed_lineage;
};

// Runs cfg.max_steps steps of cfg.mode over `dataset`. Starts from `init`
// when given, otherwise from random weights seeded by cfg.seed. In rlsr mode
// the KL reference is the starting policy and is never refreshed. When
// out_dir is non-empty it receives metrics.csv, config.json, periodic
// checkpoint-<step>/ directories and final/.
TrainResult train(const data::Dataset& dataset, const TrainConfig& cfg,
                  const std::optional<ckpt::Checkpoint>& init,
                  const std::filesystem::path& out_dir = {});

}  // namespace rlsr::train
