// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numbers>
#include <cstdio>
#include <string>

#include <json.hpp>

#include "rlsr/errors.hpp"
#include "rlsr/trainer.hpp"

namespace rlsr::train {
namespace {

using nlohmann::json;

std::string_view adv_name(AdvantageNorm a) {
  return a == AdvantageNorm::kMeanOnly ? "mean-only" : "mean-std";
}

std::string_view kl_name(KlEstimator k) { return k == KlEstimator::kK1 ? "k1" : "k3"; }

std::string fmt9(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

template <class T>
T get_as(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw UsageError("config key '" + key + "' has the wrong type");
  }
}

}  // namespace

TrainConfig TrainConfig::defaults(Mode mode) {
  TrainConfig c;
  c.mode = mode;
  if (mode == Mode::kRlsr) {
    c.lr = 3e-5;
    c.batch_size = 16;
  }
  return c;
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw UsageError("lr must be positive");
  if (batch_size == 0) throw UsageError("batch_size must be at least 1");
  if (mode == Mode::kRlsr && group_size < 2) {
    throw UsageError("group_size must be at least 2 in rlsr mode");
  }
  if (!(kl_coef >= 0.0)) throw UsageError("kl_coef must be non-negative");
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw UsageError("clip_eps must lie in (0, 1)");
  if (!(minibatch_frac > 0.0 && minibatch_frac <= 1.0)) {
    throw UsageError("minibatch_frac must lie in (0, 1]");
  }
  if (!(temperature > 0.0)) throw UsageError("temperature must be positive");
  if (max_new_tokens == 0) throw UsageError("max_new_tokens must be at least 1");
  if (grad_clip < 0.0) throw UsageError("grad_clip must be non-negative");
  policy.validate();
  reward.validate();
}

double scheduled_lr(const TrainConfig& c, std::size_t step) {
  if (step < c.warmup_steps) {
    return c.lr * static_cast<double>(step + 1) / static_cast<double>(c.warmup_steps);
  }
  if (c.lr_schedule == LrSchedule::kConstant) return c.lr;
  const double span = static_cast<double>(std::max<std::size_t>(1, c.max_steps - std::min(c.max_steps, c.warmup_steps)));
  const double progress = std::min(1.0, static_cast<double>(step - c.warmup_steps) / span);
  return c.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

std::string_view mode_name(Mode mode) { return mode == Mode::kSft ? "sft" : "rlsr"; }

Mode parse_mode(std::string_view name) {
  if (name == "sft") return Mode::kSft;
  if (name == "rlsr") return Mode::kRlsr;
  throw UsageError("unknown mode '" + std::string(name) + "' (expected sft or rlsr)");
}

std::string to_json(const TrainConfig& c) {
  const auto& e = c.reward.encoder;
  json j = {
      {"mode", mode_name(c.mode)},
      {"lr", c.lr},
      {"warmup_steps", c.warmup_steps},
      {"lr_schedule", c.lr_schedule == LrSchedule::kCosine ? "cosine" : "constant"},
      {"batch_size", c.batch_size},
      {"group_size", c.group_size},
      {"kl_coef", c.kl_coef},
      {"clip_eps", c.clip_eps},
      {"adv_norm", adv_name(c.adv_norm)},
      {"minibatch_frac", c.minibatch_frac},
      {"temperature", c.temperature},
      {"max_new_tokens", c.max_new_tokens},
      {"max_steps", c.max_steps},
      {"eval_interval", c.eval_interval},
      {"seed", c.seed},
      {"kl_estimator", kl_name(c.kl_estimator)},
      {"weight_decay", c.weight_decay},
      {"grad_clip", c.grad_clip},
      {"adam_beta1", c.adam_beta1},
      {"adam_beta2", c.adam_beta2},
      {"greedy_rollouts", c.greedy_rollouts},
      {"d_model", c.policy.d_model},
      {"layers", c.policy.layers},
      {"heads", c.policy.heads},
      {"ffn_mult", c.policy.ffn_mult},
      {"context", c.policy.context},
      {"init_std", c.init_std},
      {"ngram_orders", e.orders},
      {"embed_dim", e.dim},
      {"hash_seed", e.hash_seed},
      {"tf_mode", e.tf == embed::TfMode::kRaw ? "raw" : "sublinear"},
      {"embed_truncate", e.truncate},
      {"embed_with_prompt", c.reward.embed_with_prompt},
      {"penalty_min_length", c.reward.penalty.min_length},
      {"penalty_min_ratio", c.reward.penalty.min_ratio},
      {"penalty_non_overlapping", c.reward.penalty.non_overlapping},
      {"penalty_value", c.reward.penalty_value},
      {"penalty_mode",
       c.reward.penalty_mode == reward::PenaltyMode::kReplace ? "replace" : "additive"},
  };
  return j.dump();
}

TrainConfig apply_json(const TrainConfig& base, std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  TrainConfig c = base;
  auto& e = c.reward.encoder;
  for (const auto& [key, v] : j.items()) {
    if (key == "mode") c.mode = parse_mode(get_as<std::string>(v, key));
    else if (key == "lr") c.lr = get_as<double>(v, key);
    else if (key == "warmup_steps") c.warmup_steps = get_as<std::size_t>(v, key);
    else if (key == "lr_schedule") {
      const auto s = get_as<std::string>(v, key);
      if (s == "constant") c.lr_schedule = LrSchedule::kConstant;
      else if (s == "cosine") c.lr_schedule = LrSchedule::kCosine;
      else throw UsageError("lr_schedule must be constant or cosine");
    } else if (key == "batch_size") c.batch_size = get_as<std::size_t>(v, key);
    else if (key == "group_size") c.group_size = get_as<std::size_t>(v, key);
    else if (key == "kl_coef") c.kl_coef = get_as<double>(v, key);
    else if (key == "clip_eps") c.clip_eps = get_as<double>(v, key);
    else if (key == "adv_norm") {
      const auto s = get_as<std::string>(v, key);
      if (s == "mean-only") c.adv_norm = AdvantageNorm::kMeanOnly;
      else if (s == "mean-std") c.adv_norm = AdvantageNorm::kMeanStd;
      else throw UsageError("adv_norm must be mean-only or mean-std");
    } else if (key == "minibatch_frac") c.minibatch_frac = get_as<double>(v, key);
    else if (key == "temperature") c.temperature = get_as<double>(v, key);
    else if (key == "max_new_tokens") c.max_new_tokens = get_as<std::size_t>(v, key);
    else if (key == "max_steps") c.max_steps = get_as<std::size_t>(v, key);
    else if (key == "eval_interval") c.eval_interval = get_as<std::size_t>(v, key);
    else if (key == "seed") c.seed = get_as<std::uint64_t>(v, key);
    else if (key == "kl_estimator") {
      const auto s = get_as<std::string>(v, key);
      if (s == "k1") c.kl_estimator = KlEstimator::kK1;
      else if (s == "k3") c.kl_estimator = KlEstimator::kK3;
      else throw UsageError("kl_estimator must be k1 or k3");
    } else if (key == "weight_decay") c.weight_decay = get_as<double>(v, key);
    else if (key == "grad_clip") c.grad_clip = get_as<double>(v, key);
    else if (key == "adam_beta1") c.adam_beta1 = get_as<double>(v, key);
    else if (key == "adam_beta2") c.adam_beta2 = get_as<double>(v, key);
    else if (key == "greedy_rollouts") c.greedy_rollouts = get_as<bool>(v, key);
    else if (key == "d_model") c.policy.d_model = get_as<std::size_t>(v, key);
    else if (key == "layers") c.policy.layers = get_as<std::size_t>(v, key);
    else if (key == "heads") c.policy.heads = get_as<std::size_t>(v, key);
    else if (key == "ffn_mult") c.policy.ffn_mult = get_as<std::size_t>(v, key);
    else if (key == "context") c.policy.context = get_as<std::size_t>(v, key);
    else if (key == "init_std") c.init_std = get_as<double>(v, key);
    else if (key == "ngram_orders") e.orders = get_as<std::vector<int>>(v, key);
    else if (key == "embed_dim") e.dim = get_as<std::size_t>(v, key);
    else if (key == "hash_seed") e.hash_seed = get_as<std::uint64_t>(v, key);
    else if (key == "tf_mode") {
      const auto s = get_as<std::string>(v, key);
      if (s == "raw") e.tf = embed::TfMode::kRaw;
      else if (s == "sublinear") e.tf = embed::TfMode::kSublinear;
      else throw UsageError("tf_mode must be raw or sublinear");
    } else if (key == "embed_truncate") e.truncate = get_as<std::size_t>(v, key);
    else if (key == "embed_with_prompt") c.reward.embed_with_prompt = get_as<bool>(v, key);
    else if (key == "penalty_min_length") c.reward.penalty.min_length = get_as<std::size_t>(v, key);
    else if (key == "penalty_min_ratio") c.reward.penalty.min_ratio = get_as<double>(v, key);
    else if (key == "penalty_non_overlapping") c.reward.penalty.non_overlapping = get_as<bool>(v, key);
    else if (key == "penalty_value") c.reward.penalty_value = get_as<double>(v, key);
    else if (key == "penalty_mode") {
      const auto s = get_as<std::string>(v, key);
      if (s == "replace") c.reward.penalty_mode = reward::PenaltyMode::kReplace;
      else if (s == "additive") c.reward.penalty_mode = reward::PenaltyMode::kAdditive;
      else throw UsageError("penalty_mode must be replace or additive");
    } else {
      throw UsageError("unknown config key '" + key + "'");
    }
  }
  return c;
}

std::string metrics_csv_header() {
  return "step,mean_reward,mean_cosine,penalty_rate,mean_kl,entropy,loss,mean_len,wall_ms";
}

std::string metrics_csv_row(const StepMetrics& m) {
  return std::to_string(m.step) + "," + fmt9(m.mean_reward) + "," + fmt9(m.mean_cosine) + "," +
         fmt9(m.penalty_rate) + "," + fmt9(m.mean_kl) + "," + fmt9(m.entropy) + "," +
         fmt9(m.loss) + "," + fmt9(m.mean_len) + "," + fmt9(m.wall_ms);
}

}  // namespace rlsr::train
