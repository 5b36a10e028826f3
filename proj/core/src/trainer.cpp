// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#include "rlsr/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "rlsr/errors.hpp"
#include "rlsr/log.hpp"
#include "rlsr/rng.hpp"
#include "rlsr/vocab.hpp"

namespace rlsr::train {
namespace {

using Clock = std::chrono::steady_clock;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kAdvantageEps = 1e-8;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

double mean_row_entropy(const ad::Tensor& log_softmax) {
  const std::size_t rows = log_softmax.shape[0], cols = log_softmax.shape[1];
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    double h = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      const double lp = log_softmax.data[i * cols + j];
      h -= std::exp(lp) * lp;
    }
    total += h;
  }
  return total / static_cast<double>(rows);
}

ad::OptimizerState make_optimizer(const TrainConfig& cfg) {
  ad::OptimizerState s;
  s.lr = cfg.lr;
  s.beta1 = cfg.adam_beta1;
  s.beta2 = cfg.adam_beta2;
  s.weight_decay = cfg.weight_decay;
  return s;
}

bool all_zero(const std::vector<ad::Parameter>& params) {
  for (const auto& p : params)
    for (double g : p.grad)
      if (g != 0.0) return false;
  return true;
}

// Applies one optimizer update unless the gradient is identically zero.
bool apply_update(policy::Policy& policy, ad::OptimizerState& opt, const TrainConfig& cfg) {
  if (all_zero(policy.parameters())) return false;
  auto ptrs = policy.parameter_ptrs();
  if (cfg.grad_clip > 0.0) ad::clip_grad_norm(ptrs, cfg.grad_clip);
  ad::adam_step(ptrs, opt);
  return true;
}

bool fits(const policy::PolicyConfig& pc, const data::Sample& s) {
  return s.prompt.size() + 2 + s.response.size() <= pc.context;
}

// Derivative of the per-token KL estimate with respect to log pi.
double kl_value(KlEstimator est, double logp, double ref) {
  if (est == KlEstimator::kK1) return logp - ref;
  const double d = ref - logp;
  return std::exp(d) - d - 1.0;
}

double kl_grad(KlEstimator est, double logp, double ref) {
  if (est == KlEstimator::kK1) return 1.0;
  return 1.0 - std::exp(ref - logp);
}

/// Epoch-wise seeded sampler over dataset indices.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::uint64_t seed) : n_(n), seed_(seed) {}

  std::vector<std::size_t> next(std::size_t count) {
    std::vector<std::size_t> out;
    out.reserve(count);
    while (out.size() < count) {
      if (pos_ == perm_.size()) {
        perm_ = seeded_permutation(n_, mix64(seed_ ^ mix64(epoch_++)));
        pos_ = 0;
      }
      out.push_back(perm_[pos_++]);
    }
    return out;
  }

 private:
  std::size_t n_;
  std::uint64_t seed_;
  std::uint64_t epoch_ = 0;
  std::vector<std::size_t> perm_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<double> compute_group_advantages(std::span<const double> rewards,
                                             AdvantageNorm mode) {
  if (rewards.size() < 2) throw ContractError("advantages need a group of at least 2 rewards");
  std::vector<double> adv(rewards.size(), 0.0);
  const auto [lo, hi] = std::minmax_element(rewards.begin(), rewards.end());
  if (*lo == *hi) return adv;
  const double n = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = rewards[i] - mean;
  if (mode == AdvantageNorm::kMeanStd) {
    double var = 0.0;
    for (double a : adv) var += a * a;
    const double sd = std::sqrt(var / n);
    for (double& a : adv) a /= sd + kAdvantageEps;
  }
  return adv;
}

LossStats sft_loss(policy::Policy& policy, std::span<const data::Sample> batch,
                   bool accumulate_grad) {
  LossStats stats;
  if (batch.empty()) return stats;
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  for (const auto& s : batch) {
    const auto prompt = data::prompt_ids(s.prompt);
    const auto response = data::response_ids(s.response);
    ad::Tape tape;
    const auto r = policy.response_log_probs(tape, prompt, response);
    const double n = static_cast<double>(response.size());
    ad::Var loss = tape.scalar_mul(tape.sum(r.token_log_probs), -inv_batch / n);
    stats.loss += tape.value(loss)[0];
    stats.tokens += response.size();
    if (accumulate_grad) tape.backward(loss);
  }
  return stats;
}

LossStats ppo_loss(policy::Policy& policy, std::span<const RolloutView> batch,
                   const TrainConfig& cfg, bool accumulate_grad) {
  LossStats stats;
  if (batch.empty()) return stats;
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  const double lo = 1.0 - cfg.clip_eps, hi = 1.0 + cfg.clip_eps;
  for (const auto& ro : batch) {
    ad::Tape tape;
    const auto r = policy.response_log_probs(tape, ro.prompt, ro.response);
    const auto& logp = tape.value(r.token_log_probs).data;
    const std::size_t n = logp.size();
    if (ro.old_log_probs.size() != n || ro.ref_log_probs.size() != n) {
      throw DimensionError("rollout log-prob arrays do not match the response length");
    }
    const double scale = inv_batch / static_cast<double>(n);
    std::vector<double> coeff(n);
    double response_loss = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double ratio = std::exp(logp[t] - ro.old_log_probs[t]);
      stats.max_ratio_deviation = std::max(stats.max_ratio_deviation, std::abs(ratio - 1.0));
      // k1 enters as a detached per-token shift of the advantage, so its
      // gradient is the score-function gradient of the token KL.
      const bool k1 = cfg.kl_estimator == KlEstimator::kK1;
      const double a =
          k1 ? ro.advantage - cfg.kl_coef * kl_value(KlEstimator::kK1, ro.old_log_probs[t],
                                                     ro.ref_log_probs[t])
             : ro.advantage;
      const double unclipped = ratio * a;
      const double clipped = std::clamp(ratio, lo, hi) * a;
      const double surrogate = std::min(unclipped, clipped);
      // Gradient flows only through the unclipped branch when it is the min.
      const bool active = unclipped <= clipped;
      response_loss += -surrogate;
      double d = active ? -ratio * a : 0.0;
      if (!k1) {
        response_loss += cfg.kl_coef * kl_value(cfg.kl_estimator, logp[t], ro.ref_log_probs[t]);
        d += cfg.kl_coef * kl_grad(cfg.kl_estimator, logp[t], ro.ref_log_probs[t]);
      }
      coeff[t] = d * scale;
    }
    stats.loss += response_loss * scale;
    stats.tokens += n;
    if (accumulate_grad) {
      // sum_t coeff_t * logp_t has the same parameter gradient as the loss.
      ad::Var c = tape.constant(ad::Tensor({n}, std::move(coeff)));
      tape.backward(tape.sum(tape.mul(r.token_log_probs, c)));
    }
  }
  if (!std::isfinite(stats.loss)) throw NumericError("non-finite PPO loss");
  return stats;
}

SftTrainer::SftTrainer(policy::Policy& policy, const TrainConfig& cfg)
    : policy_(policy), cfg_(cfg), opt_(make_optimizer(cfg)) {}

StepMetrics SftTrainer::step(std::span<const data::Sample> batch) {
  const auto start = Clock::now();
  StepMetrics m;
  m.step = step_++;
  m.mean_reward = m.mean_cosine = m.penalty_rate = m.mean_kl = kNaN;
  std::vector<data::Sample> usable;
  for (const auto& s : batch) {
    if (fits(policy_.config(), s)) usable.push_back(s);
    else ++m.skipped;
  }
  if (m.skipped > 0) log::warn("sft step skipped " + std::to_string(m.skipped) + " over-length samples");
  if (usable.empty()) {
    m.loss = m.entropy = m.mean_len = kNaN;
    m.wall_ms = elapsed_ms(start);
    return m;
  }
  policy_.zero_grad();
  double entropy = 0.0, len = 0.0;
  const double inv = 1.0 / static_cast<double>(usable.size());
  for (const auto& s : usable) {
    const auto prompt = data::prompt_ids(s.prompt);
    const auto response = data::response_ids(s.response);
    ad::Tape tape;
    const auto r = policy_.response_log_probs(tape, prompt, response);
    const double n = static_cast<double>(response.size());
    ad::Var loss = tape.scalar_mul(tape.sum(r.token_log_probs), -inv / n);
    m.loss += tape.value(loss)[0];
    entropy += mean_row_entropy(tape.value(r.log_softmax));
    len += static_cast<double>(s.response.size());
    tape.backward(loss);
  }
  if (!std::isfinite(m.loss)) throw NumericError("non-finite SFT loss");
  opt_.lr = scheduled_lr(cfg_, m.step);
  m.updates = apply_update(policy_, opt_, cfg_) ? 1 : 0;
  m.entropy = entropy * inv;
  m.mean_len = len * inv;
  m.wall_ms = elapsed_ms(start);
  return m;
}

RlsrTrainer::RlsrTrainer(policy::Policy& policy, policy::PolicySnapshot reference,
                         const TrainConfig& cfg)
    : policy_(policy), reference_(std::move(reference)), cfg_(cfg), scorer_(cfg.reward),
      opt_(make_optimizer(cfg)) {
  if (cfg_.group_size < 2) throw ContractError("rlsr needs group_size >= 2");
  if (!(reference_.policy().config() == policy_.config())) {
    throw ContractError("reference policy architecture differs from the live policy");
  }
}

RolloutGroup RlsrTrainer::collect(const data::Sample& sample, std::uint64_t seed) const {
  RolloutGroup g;
  g.prompt = data::prompt_ids(sample.prompt);
  if (g.prompt.size() >= policy_.config().context) {
    throw ContractError("prompt leaves no room for a response in the context window");
  }
  policy::SamplingOptions so;
  so.temperature = cfg_.temperature;
  so.max_new_tokens = cfg_.max_new_tokens;
  so.count = cfg_.group_size;
  so.seed = seed;
  so.greedy = cfg_.greedy_rollouts;
  const auto samples = policy_.sample(g.prompt, so);
  std::vector<double> rewards;
  for (const auto& s : samples) {
    const std::string text = data::decode(s.ids);
    g.rewards.push_back(scorer_.score(sample.prompt, text, sample.response));
    rewards.push_back(g.rewards.back().final_reward);
    g.truncated.push_back(s.truncated);

    ad::Tape tape;
    const auto r = policy_.response_log_probs(tape, g.prompt, s.ids);
    g.old_log_probs.push_back(tape.value(r.token_log_probs).data);
    g.entropy.push_back(mean_row_entropy(tape.value(r.log_softmax)));
    g.ref_log_probs.push_back(reference_.sequence_log_prob(g.prompt, s.ids).per_token);
    g.responses.push_back(s.ids);
  }
  g.advantages = compute_group_advantages(rewards, cfg_.adv_norm);
  return g;
}

StepMetrics RlsrTrainer::step(std::span<const data::Sample> prompts) {
  if (prompts.empty()) throw ContractError("rlsr step needs at least one prompt");
  const auto start = Clock::now();
  StepMetrics m;
  m.step = step_++;

  const auto saved_params = policy_.parameters();
  const auto saved_opt = opt_;
  opt_.lr = scheduled_lr(cfg_, m.step);
  try {
    last_.clear();
    const CounterRng seeds(cfg_.seed, 0x7011ULL + m.step);
    for (std::size_t i = 0; i < prompts.size(); ++i) last_.push_back(collect(prompts[i], seeds.at(i)));

    std::size_t responses = 0, tokens = 0, penalties = 0, truncated = 0;
    double reward_sum = 0.0, cosine_sum = 0.0, kl_sum = 0.0, entropy_sum = 0.0, len_sum = 0.0;
    std::vector<RolloutView> views;
    for (const auto& g : last_) {
      for (std::size_t k = 0; k < g.responses.size(); ++k) {
        ++responses;
        reward_sum += g.rewards[k].final_reward;
        cosine_sum += g.rewards[k].cosine;
        penalties += g.rewards[k].penalty_triggered ? 1 : 0;
        truncated += g.truncated[k] ? 1 : 0;
        entropy_sum += g.entropy[k];
        len_sum += static_cast<double>(data::decode(g.responses[k]).size());
        for (std::size_t t = 0; t < g.old_log_probs[k].size(); ++t) {
          kl_sum += g.old_log_probs[k][t] - g.ref_log_probs[k][t];
          ++tokens;
        }
        views.push_back({g.prompt, g.responses[k], g.old_log_probs[k], g.ref_log_probs[k],
                         g.advantages[k]});
      }
    }
    if (truncated > 0) {
      log::debug("rlsr step " + std::to_string(m.step) + ": " + std::to_string(truncated) +
                 " responses hit max_new_tokens without EOS");
    }
    const double nr = static_cast<double>(responses);
    m.mean_reward = reward_sum / nr;
    m.mean_cosine = cosine_sum / nr;
    m.penalty_rate = static_cast<double>(penalties) / nr;
    m.mean_kl = kl_sum / static_cast<double>(tokens);
    m.entropy = entropy_sum / nr;
    m.mean_len = len_sum / nr;

    const auto mb = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(nr * cfg_.minibatch_frac)));
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < views.size(); begin += mb) {
      const auto count = std::min(mb, views.size() - begin);
      policy_.zero_grad();
      const auto stats =
          ppo_loss(policy_, std::span(views).subspan(begin, count), cfg_, true);
      if (begin == 0) diag_.first_minibatch_ratio_deviation = stats.max_ratio_deviation;
      loss_sum += stats.loss;
      ++batches;
      if (apply_update(policy_, opt_, cfg_)) {
        ++diag_.updates;
        ++m.updates;
      } else {
        ++diag_.skipped_updates;
      }
    }
    m.loss = loss_sum / static_cast<double>(batches);
  } catch (const NumericError& e) {
    policy_.parameters() = saved_params;
    opt_ = saved_opt;
    ++diag_.aborted_steps;
    m.aborted = true;
    m.updates = 0;
    m.loss = kNaN;
    log::warn("rlsr step " + std::to_string(m.step) + " aborted, parameters restored: " + e.what());
  }
  m.wall_ms = elapsed_ms(start);
  return m;
}

TrainResult train(const data::Dataset& dataset, const TrainConfig& cfg_in,
                  const std::optional<ckpt::Checkpoint>& init,
                  const std::filesystem::path& out_dir) {
  if (dataset.empty()) throw UsageError("training dataset is empty");
  TrainConfig cfg = cfg_in;
  std::vector<std::uint64_t> lineage;
  std::optional<policy::Policy> start;
  if (init) {
    cfg.policy = init->policy.config();
    start.emplace(init->policy);
    lineage = init->manifest.seed_lineage;
  } else {
    start.emplace(cfg.policy, policy::InitOptions{.seed = cfg.seed, .stddev = cfg.init_std});
  }
  cfg.validate();
  lineage.push_back(cfg.seed);

  std::ofstream csv;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream(out_dir / "config.json") << to_json(cfg) << '\n';
    csv.open(out_dir / "metrics.csv", std::ios::trunc);
    if (!csv) throw IoError("cannot write " + (out_dir / "metrics.csv").string());
    csv << metrics_csv_header() << '\n';
  }

  policy::Policy policy = *start;
  TrainResult result{policy, {}, {}, lineage};
  ckpt::Manifest manifest;
  manifest.policy = policy.config();
  manifest.seed_lineage = lineage;
  manifest.mode = std::string(mode_name(cfg.mode));
  manifest.train_config_json = to_json(cfg);

  std::optional<SftTrainer> sft;
  std::optional<RlsrTrainer> rl;
  if (cfg.mode == Mode::kSft) sft.emplace(policy, cfg);
  else rl.emplace(policy, policy.snapshot_reference(), cfg);

  BatchSampler sampler(dataset.size(), mix64(cfg.seed ^ 0xba7c4ULL));
  std::vector<data::Sample> batch;
  for (std::size_t step = 0; step < cfg.max_steps; ++step) {
    batch.clear();
    for (auto i : sampler.next(cfg.batch_size)) batch.push_back(dataset.samples[i]);
    const StepMetrics m = sft ? sft->step(batch) : rl->step(batch);
    result.metrics.push_back(m);
    if (csv.is_open()) {
      csv << metrics_csv_row(m) << '\n';
      csv.flush();
      if (!csv) throw IoError("metrics write failed");
    }
    if (log::level() >= log::Level::kDebug || (step + 1) % 50 == 0) {
      log::info(std::string(mode_name(cfg.mode)) + " step " + std::to_string(m.step) +
                " loss " + std::to_string(m.loss) +
                (cfg.mode == Mode::kRlsr ? " reward " + std::to_string(m.mean_reward) +
                                               " kl " + std::to_string(m.mean_kl)
                                         : std::string()));
    }
    if (!out_dir.empty() && cfg.eval_interval > 0 && (step + 1) % cfg.eval_interval == 0 &&
        step + 1 < cfg.max_steps) {
      manifest.step = static_cast<std::int64_t>(step + 1);
      ckpt::save(out_dir / ("checkpoint-" + std::to_string(step + 1)), policy,
                 sft ? &sft->optimizer() : &rl->optimizer(), manifest);
    }
  }
  result.optimizer = sft ? sft->optimizer() : rl->optimizer();
  result.policy = policy;
  if (!out_dir.empty()) {
    manifest.step = static_cast<std::int64_t>(cfg.max_steps);
    ckpt::save(out_dir / "final", policy, &result.optimizer, manifest);
  }
  return result;
}

}  // namespace rlsr::train
