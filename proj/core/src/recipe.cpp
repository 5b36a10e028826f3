// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#include "rlsr/recipe.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "rlsr/checkpoint.hpp"
#include "rlsr/errors.hpp"
#include "rlsr/log.hpp"

namespace rlsr::recipe {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

template <class T>
T field(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw UsageError(std::string("recipe field '") + key + "' has the wrong type");
  }
}

bool compare(double lhs, const std::string& cmp, double rhs) {
  if (cmp == ">=") return lhs >= rhs;
  if (cmp == "<=") return lhs <= rhs;
  if (cmp == ">") return lhs > rhs;
  if (cmp == "<") return lhs < rhs;
  throw UsageError("unknown comparator '" + cmp + "'");
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

Recipe parse_recipe(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("recipe is not valid JSON: ") + e.what());
  }
  Recipe r;
  r.name = field<std::string>(j, "name", "");
  if (r.name.empty()) throw UsageError("recipe needs a name");
  r.description = field<std::string>(j, "description", "");
  r.seeds = field<std::vector<std::uint64_t>>(j, "seeds", {0});
  if (r.seeds.empty()) throw UsageError("recipe needs at least one seed");
  r.min_passing_seeds = field<std::size_t>(j, "min_passing_seeds", r.seeds.size());
  r.held_out_fraction = field<double>(j, "held_out_fraction", 0.1);
  r.eval_limit = field<std::size_t>(j, "eval_limit", 0);
  r.eval_max_new_tokens = field<std::size_t>(j, "eval_max_new_tokens", 128);
  r.dip_window = field<std::size_t>(j, "dip_window", 500);
  r.max_wall_seconds = field<double>(j, "max_wall_seconds", 0.0);

  const json d = field<json>(j, "data", json::object());
  r.data.kind = data::parse_task_kind(field<std::string>(d, "task", "copy"));
  r.data.n = field<std::size_t>(d, "n", 1000);
  r.data.seed = field<std::uint64_t>(d, "seed", 0);
  r.data.min_len = field<std::size_t>(d, "min_len", r.data.min_len);
  r.data.max_len = field<std::size_t>(d, "max_len", r.data.max_len);

  // Stage name -> whether it is shared across seeds.
  std::map<std::string, bool> seen;
  for (const auto& s : field<json>(j, "stages", json::array())) {
    Stage st;
    st.name = field<std::string>(s, "name", "");
    st.mode = train::parse_mode(field<std::string>(s, "mode", "sft"));
    st.init = s.contains("init") && !s.at("init").is_null() ? field<std::string>(s, "init", "")
                                                            : std::string();
    st.config_json = field<json>(s, "config", json::object()).dump();
    if (s.contains("fixed_seed")) st.fixed_seed = field<std::uint64_t>(s, "fixed_seed", 0);
    if (st.name.empty()) throw UsageError("every stage needs a name");
    if (seen.count(st.name)) throw UsageError("duplicate stage '" + st.name + "'");
    if (!st.init.empty() && !seen.count(st.init)) {
      throw UsageError("stage '" + st.name + "' starts from unknown stage '" + st.init + "'");
    }
    // Validate the config early so a typo fails before any training.
    train::apply_json(train::TrainConfig::defaults(st.mode), st.config_json).validate();
    if (st.fixed_seed && !st.init.empty() && !seen.at(st.init)) {
      throw UsageError("fixed-seed stage '" + st.name + "' cannot start from per-seed stage '" +
                       st.init + "'");
    }
    seen[st.name] = st.fixed_seed.has_value();
    r.stages.push_back(std::move(st));
  }
  if (r.stages.empty()) throw UsageError("recipe needs at least one stage");

  for (const auto& c : field<json>(j, "envelope", json::array())) {
    Check chk;
    chk.stage = field<std::string>(c, "stage", "");
    chk.metric = field<std::string>(c, "metric", "");
    chk.cmp = field<std::string>(c, "cmp", ">=");
    if (c.contains("threshold")) chk.threshold = field<double>(c, "threshold", 0.0);
    chk.other_stage = field<std::string>(c, "other_stage", "");
    if (!seen.count(chk.stage)) throw UsageError("envelope names unknown stage '" + chk.stage + "'");
    if (chk.threshold.has_value() == !chk.other_stage.empty()) {
      throw UsageError("envelope check needs exactly one of threshold or other_stage");
    }
    if (!chk.other_stage.empty() && !seen.count(chk.other_stage)) {
      throw UsageError("envelope names unknown stage '" + chk.other_stage + "'");
    }
    compare(0.0, chk.cmp, 0.0);
    r.envelope.push_back(std::move(chk));
  }
  return r;
}

Recipe load_recipe(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read recipe " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_recipe(ss.str());
}

fs::path find_recipe(const std::string& name, const std::vector<fs::path>& dirs) {
  for (const auto& d : dirs) {
    const fs::path p = d / (name + ".json");
    if (fs::exists(p)) return p;
  }
  throw UsageError("unknown recipe '" + name + "'");
}

const StageResult* SeedResult::stage(const std::string& name) const {
  for (const auto& s : stages)
    if (s.name == name) return &s;
  return nullptr;
}

double metric_value(const StageResult& s, const std::string& metric, std::size_t dip_window) {
  const auto& r = s.report;
  if (metric == "mean_reward") return r.mean_reward;
  if (metric == "mean_cosine") return r.mean_cosine;
  if (metric == "exact_match") return r.exact_match;
  if (metric == "penalty_rate") return r.penalty_rate;
  if (metric == "mean_len") return r.mean_len;
  if (metric == "step0_kl") {
    return s.metrics.empty() ? std::numeric_limits<double>::quiet_NaN() : s.metrics.front().mean_kl;
  }
  if (metric == "final_kl") {
    if (s.metrics.empty()) return std::numeric_limits<double>::quiet_NaN();
    const std::size_t k = std::min<std::size_t>(10, s.metrics.size());
    double sum = 0.0;
    for (std::size_t i = s.metrics.size() - k; i < s.metrics.size(); ++i) sum += s.metrics[i].mean_kl;
    return sum / static_cast<double>(k);
  }
  if (metric == "reward_dip") {
    if (s.reward_curve.empty()) return 0.0;
    const std::size_t last = s.reward_curve.back().first;
    const std::size_t from = last > dip_window ? last - dip_window : 0;
    double best = -std::numeric_limits<double>::infinity(), dip = 0.0;
    for (const auto& [step, reward] : s.reward_curve) {
      // The running maximum includes evaluations just before the window.
      best = std::max(best, reward);
      if (step >= from && best > 0.0) dip = std::max(dip, (best - reward) / best);
    }
    return dip;
  }
  throw UsageError("unknown envelope metric '" + metric + "'");
}

RecipeResult run_recipe(const Recipe& recipe, const fs::path& out_dir) {
  const auto start = std::chrono::steady_clock::now();
  RecipeResult result;
  result.name = recipe.name;
  fs::create_directories(out_dir);
  fs::remove(out_dir / "eval.csv");

  const data::Dataset full = data::generate_task(recipe.data);
  const data::Split split = data::split_held_out(full, recipe.held_out_fraction);
  data::Dataset held_out = split.held_out;
  if (recipe.eval_limit > 0 && held_out.samples.size() > recipe.eval_limit) {
    held_out.samples.resize(recipe.eval_limit);
  }

  json summary = {{"name", recipe.name}, {"seeds", json::array()}};
  std::size_t passing = 0;
  std::map<std::string, std::pair<StageResult, ckpt::Checkpoint>> shared;
  for (const std::uint64_t seed : recipe.seeds) {
    SeedResult sr;
    sr.seed = seed;
    std::map<std::string, ckpt::Checkpoint> finals;
    const fs::path seed_dir = out_dir / ("seed-" + std::to_string(seed));
    for (const auto& st : recipe.stages) {
      if (auto it = shared.find(st.name); it != shared.end()) {
        finals.emplace(st.name, it->second.second);
        sr.stages.push_back(it->second.first);
        continue;
      }
      train::TrainConfig cfg =
          train::apply_json(train::TrainConfig::defaults(st.mode), st.config_json);
      cfg.mode = st.mode;
      cfg.seed = st.fixed_seed.value_or(seed);
      std::optional<ckpt::Checkpoint> init;
      if (!st.init.empty()) init = finals.at(st.init);
      const fs::path stage_dir =
          st.fixed_seed ? out_dir / ("shared-" + st.name) : seed_dir / st.name;
      fs::remove_all(stage_dir);
      log::info("recipe " + recipe.name + " seed " + std::to_string(seed) + ": stage " + st.name);
      train::TrainResult tr = train::train(split.train, cfg, init, stage_dir);

      eval::EvalOptions eo;
      eo.reward = cfg.reward;
      eo.max_new_tokens = recipe.eval_max_new_tokens;
      eo.seed = cfg.seed;

      StageResult res;
      res.name = st.name;
      res.out_dir = stage_dir;
      res.metrics = tr.metrics;
      if (cfg.eval_interval > 0) {
        for (std::size_t s = cfg.eval_interval; s < cfg.max_steps; s += cfg.eval_interval) {
          const fs::path ck_dir = stage_dir / ("checkpoint-" + std::to_string(s));
          const auto report = eval::evaluate(ckpt::load(ck_dir).policy, held_out, eo);
          res.reward_curve.emplace_back(s, report.mean_reward);
          eval::append_csv(out_dir / "eval.csv", ck_dir.lexically_relative(out_dir).generic_string(),
                           report);
        }
      }
      res.report = eval::evaluate(tr.policy, held_out, eo);
      res.reward_curve.emplace_back(cfg.max_steps, res.report.mean_reward);
      eval::append_csv(out_dir / "eval.csv",
                       stage_dir.lexically_relative(out_dir).generic_string(), res.report);
      log::info("  " + eval::to_json(res.report));

      finals.emplace(st.name, ckpt::load(stage_dir / "final"));
      if (st.fixed_seed) shared.emplace(st.name, std::pair{res, finals.at(st.name)});
      sr.stages.push_back(std::move(res));
    }

    for (const auto& c : recipe.envelope) {
      const double lhs = metric_value(*sr.stage(c.stage), c.metric, recipe.dip_window);
      const double rhs = c.threshold ? *c.threshold
                                     : metric_value(*sr.stage(c.other_stage), c.metric,
                                                    recipe.dip_window);
      if (!compare(lhs, c.cmp, rhs)) {
        sr.failures.push_back("seed " + std::to_string(seed) + ": " + c.stage + "." + c.metric +
                              " = " + num(lhs) + " violates " + c.cmp + " " + num(rhs) +
                              (c.other_stage.empty() ? "" : " (" + c.other_stage + ")"));
      }
    }
    if (sr.passed()) ++passing;

    json js = {{"seed", seed}, {"passed", sr.passed()}, {"failures", sr.failures},
               {"stages", json::object()}};
    for (const auto& s : sr.stages) js["stages"][s.name] = json::parse(eval::to_json(s.report));
    summary["seeds"].push_back(js);
    result.seeds.push_back(std::move(sr));
  }

  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (const auto& s : result.seeds)
    for (const auto& f : s.failures) result.failures.push_back(f);
  result.passed = passing >= recipe.min_passing_seeds;
  if (recipe.max_wall_seconds > 0.0 && result.wall_seconds > recipe.max_wall_seconds) {
    result.passed = false;
    result.failures.push_back("wall time " + num(result.wall_seconds) + " s exceeds " +
                              num(recipe.max_wall_seconds) + " s");
  }
  summary["passing_seeds"] = passing;
  summary["min_passing_seeds"] = recipe.min_passing_seeds;
  summary["passed"] = result.passed;
  summary["wall_seconds"] = result.wall_seconds;
  std::ofstream(out_dir / "summary.json") << summary.dump(2) << '\n';
  return result;
}

}  // namespace rlsr::recipe
