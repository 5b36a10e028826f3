// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rlsr/checkpoint.hpp"
#include "rlsr/dataset.hpp"
#include "rlsr/errors.hpp"
#include "rlsr/eval.hpp"
#include "rlsr/log.hpp"
#include "rlsr/recipe.hpp"
#include "rlsr/repetition.hpp"
#include "rlsr/reward.hpp"
#include "rlsr/reward_server.hpp"
#include "rlsr/trainer.hpp"

#ifndef RLSR_DEFAULT_RECIPES_DIR
#define RLSR_DEFAULT_RECIPES_DIR "recipes"
#endif

namespace rlsr::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

train::TrainConfig load_config(train::Mode mode, const std::string& path) {
  train::TrainConfig cfg = train::TrainConfig::defaults(mode);
  if (!path.empty()) cfg = train::apply_json(cfg, read_file(path));
  return cfg;
}

data::Dataset load_dataset(const std::string& path) {
  if (path.empty()) throw UsageError("--data is required");
  if (!fs::exists(path)) throw UsageError("dataset not found: " + path);
  auto loaded = data::load_jsonl(path);
  if (loaded.skipped > 0) {
    log::warn("skipped " + std::to_string(loaded.skipped) + " malformed lines in " + path);
  }
  if (loaded.dataset.empty()) throw UsageError("dataset " + path + " has no usable samples");
  return std::move(loaded.dataset);
}

ckpt::Checkpoint load_checkpoint(const std::string& path) {
  if (path.empty()) throw UsageError("a checkpoint path is required");
  if (!fs::exists(fs::path(path) / "manifest.json")) {
    throw UsageError("checkpoint not found: " + path);
  }
  return ckpt::load(path);
}

// Held-out split of --data unless --eval-data names a separate file.
data::Dataset eval_split(const std::string& data_path, const std::string& eval_path) {
  if (!eval_path.empty()) return load_dataset(eval_path);
  return data::split_held_out(load_dataset(data_path)).held_out;
}

struct TrainFlags {
  std::string data, eval_data, config, out, init;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> steps;
  bool greedy = false;
};

void add_train(CLI::App& app, CLI::App*& sub, const char* name, const char* help, TrainFlags& f) {
  sub = app.add_subcommand(name, help);
  sub->add_option("--data", f.data, "Training JSONL file")->required();
  sub->add_option("--eval-data", f.eval_data, "Held-out JSONL evaluated after training (default: last 10% of --data)");
  sub->add_option("--config", f.config, "JSON file with TrainConfig keys");
  sub->add_option("--out", f.out, "Run directory")->required();
  sub->add_option("--init", f.init, "Checkpoint to start from");
  sub->add_option("--seed", f.seed, "Overrides the config seed");
  sub->add_option("--steps", f.steps, "Overrides max_steps");
}

int run_train(train::Mode mode, const TrainFlags& f, std::ostream& out) {
  train::TrainConfig cfg = load_config(mode, f.config);
  cfg.mode = mode;
  if (f.seed) cfg.seed = *f.seed;
  if (f.steps) cfg.max_steps = *f.steps;
  if (f.greedy) cfg.greedy_rollouts = true;
  // Without --eval-data the held-out tail of --data is kept out of training.
  data::Dataset dataset = load_dataset(f.data);
  data::Dataset eval_set;
  if (f.eval_data.empty()) {
    if (dataset.size() < 2) {
      throw UsageError("--data needs at least 2 samples to hold out an evaluation split; pass --eval-data");
    }
    auto split = data::split_held_out(dataset);
    dataset = std::move(split.train);
    eval_set = std::move(split.held_out);
  } else {
    eval_set = load_dataset(f.eval_data);
  }
  std::optional<ckpt::Checkpoint> init;
  if (!f.init.empty()) init = load_checkpoint(f.init);
  if (mode == train::Mode::kRlsr && !init) {
    log::warn("train-rlsr without --init starts from random weights");
  }
  const auto result = train::train(dataset, cfg, init, f.out);
  const auto& last = result.metrics.back();
  json summary = {{"steps", result.metrics.size()},
                  {"final_loss", last.loss},
                  {"checkpoint", (fs::path(f.out) / "final").string()}};
  if (mode == train::Mode::kRlsr) {
    summary["final_mean_reward"] = last.mean_reward;
    summary["final_mean_kl"] = last.mean_kl;
  }
  if (!eval_set.empty()) {
    eval::EvalOptions eo;
    eo.reward = cfg.reward;
    eo.max_new_tokens = cfg.max_new_tokens;
    eo.seed = cfg.seed;
    const auto report = eval::evaluate(result.policy, eval_set, eo);
    summary["eval"] = json::parse(eval::to_json(report));
  }
  out << summary.dump() << '\n';
  return kExitOk;
}

int run_serve(const std::string& host, std::uint16_t port, const std::string& config,
              std::ostream& out) {
  const auto cfg = load_config(train::Mode::kRlsr, config);
  // Block the stop signals before any thread exists so only sigwait sees them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);
  reward::RewardServer server(cfg.reward);
  const auto bound = server.start(host, port);
  out << "listening " << host << ':' << bound << std::endl;
  int sig = 0;
  sigwait(&signals, &sig);
  log::info("received signal " + std::to_string(sig) + ", shutting down");
  server.stop();
  return kExitOk;
}

}  // namespace

int cmd_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  log::init_from_env();
  CLI::App app{"Reinforcement learning from semantic rewards on byte-level tasks"};
  app.name(args.empty() ? "rlsr" : fs::path(args[0]).filename().string());
  app.require_subcommand(1);

  // gen-data
  data::GeneratorSpec gen;
  std::string task = "copy", gen_out;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic task dataset as JSONL");
  gen_cmd->add_option("--task", task, "copy, upper or keywords")->capture_default_str();
  gen_cmd->add_option("--n", gen.n, "Number of samples")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
  gen_cmd->add_option("--min-len", gen.min_len, "Minimum payload length")->capture_default_str();
  gen_cmd->add_option("--max-len", gen.max_len, "Maximum payload length")->capture_default_str();
  gen_cmd->add_option("--out", gen_out, "Output JSONL path")->required();

  TrainFlags sft_flags, rl_flags;
  CLI::App* sft_cmd = nullptr;
  CLI::App* rl_cmd = nullptr;
  add_train(app, sft_cmd, "train-sft", "Supervised fine-tuning", sft_flags);
  add_train(app, rl_cmd, "train-rlsr", "Policy optimization against the embedding reward",
            rl_flags);
  rl_cmd->add_flag("--greedy", rl_flags.greedy, "Argmax rollouts");

  // eval
  std::string eval_ckpt, eval_data, eval_held, eval_config, eval_csv = "eval.csv";
  std::uint64_t eval_seed = 0;
  bool greedy = true;
  std::size_t eval_max_new = 128;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on held-out prompts");
  eval_cmd->add_option("--init,--checkpoint", eval_ckpt, "Checkpoint directory")->required();
  eval_cmd->add_option("--data", eval_data, "Dataset whose last 10% is held out");
  eval_cmd->add_option("--eval-data", eval_held, "Held-out dataset used as is");
  eval_cmd->add_option("--config", eval_config, "JSON with reward keys");
  eval_cmd->add_option("--seed", eval_seed, "Decoding seed when sampling");
  eval_cmd->add_option("--max-new-tokens", eval_max_new)->capture_default_str();
  eval_cmd->add_flag("--greedy,!--sample", greedy, "Greedy decoding (default) or sampling");
  eval_cmd->add_option("--out", eval_csv, "CSV file the report is appended to")
      ->capture_default_str();

  // compare
  std::string cmp_a, cmp_b, cmp_data, cmp_held, cmp_config;
  auto* cmp_cmd = app.add_subcommand("compare", "Proxy win rate of checkpoint A over B");
  cmp_cmd->add_option("--a", cmp_a, "Checkpoint A")->required();
  cmp_cmd->add_option("--b", cmp_b, "Checkpoint B")->required();
  cmp_cmd->add_option("--data", cmp_data, "Dataset whose last 10% is held out");
  cmp_cmd->add_option("--eval-data", cmp_held, "Held-out dataset used as is");
  cmp_cmd->add_option("--config", cmp_config, "JSON with reward keys");

  // score
  std::string prompt, response, reference, score_config;
  auto* score_cmd = app.add_subcommand("score", "Score one response against a reference");
  score_cmd->add_option("--prompt", prompt)->required();
  score_cmd->add_option("--response", response)->required();
  score_cmd->add_option("--reference", reference)->required();
  score_cmd->add_option("--config", score_config, "JSON with reward keys");

  // serve-reward
  std::string host = "127.0.0.1", serve_config;
  std::uint16_t port = 0;
  auto* serve_cmd = app.add_subcommand("serve-reward", "Serve the reward as NDJSON over TCP");
  serve_cmd->add_option("--host", host)->capture_default_str();
  serve_cmd->add_option("--port", port, "0 picks a free port")->capture_default_str();
  serve_cmd->add_option("--config", serve_config, "JSON with reward keys");

  // lrs
  std::string text;
  bool non_overlapping = false;
  auto* lrs_cmd = app.add_subcommand("lrs", "Longest repeated substring of a text");
  lrs_cmd->add_option("--text", text)->required();
  lrs_cmd->add_flag("--non-overlapping", non_overlapping, "Occurrences may not overlap");

  // recipe
  std::string recipe_name, recipe_out, recipes_dir;
  auto* recipe_cmd = app.add_subcommand("recipe", "Run an experiment recipe");
  recipe_cmd->add_option("--name", recipe_name)->required();
  recipe_cmd->add_option("--out", recipe_out, "Output directory (default runs/<name>)");
  recipe_cmd->add_option("--recipes-dir", recipes_dir, "Directory holding <name>.json");

  std::vector<std::string> rest(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    // Subcommand --help surfaces as CallForHelp too; everything else is usage.
    if (app.get_subcommands().empty() || e.get_exit_code() != 0) {
      err << e.what() << "\n\n" << app.help();
    }
    return kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) {
      gen.kind = data::parse_task_kind(task);
      const auto ds = data::generate_task(gen);
      data::write_jsonl(gen_out, ds);
      out << json{{"samples", ds.size()}, {"out", gen_out}}.dump() << '\n';
      return kExitOk;
    }
    if (sft_cmd->parsed()) return run_train(train::Mode::kSft, sft_flags, out);
    if (rl_cmd->parsed()) return run_train(train::Mode::kRlsr, rl_flags, out);
    if (eval_cmd->parsed()) {
      if (eval_data.empty() && eval_held.empty()) throw UsageError("--data or --eval-data is required");
      const auto ck = load_checkpoint(eval_ckpt);
      eval::EvalOptions eo;
      eo.greedy = greedy;
      eo.seed = eval_seed;
      eo.max_new_tokens = eval_max_new;
      eo.reward = load_config(train::Mode::kRlsr, eval_config).reward;
      const auto report = eval::evaluate(ck.policy, eval_split(eval_data, eval_held), eo);
      out << eval::to_json(report) << '\n';
      eval::append_csv(eval_csv, eval_ckpt, report);
      return kExitOk;
    }
    if (cmp_cmd->parsed()) {
      if (cmp_data.empty() && cmp_held.empty()) throw UsageError("--data or --eval-data is required");
      const auto a = load_checkpoint(cmp_a);
      const auto b = load_checkpoint(cmp_b);
      eval::EvalOptions eo;
      eo.reward = load_config(train::Mode::kRlsr, cmp_config).reward;
      out << eval::to_json(eval::compare(a.policy, b.policy, eval_split(cmp_data, cmp_held), eo))
          << '\n';
      return kExitOk;
    }
    if (score_cmd->parsed()) {
      const auto cfg = load_config(train::Mode::kRlsr, score_config);
      const auto r = reward::score(prompt, response, reference, cfg.reward);
      out << json{{"reward", r.final_reward},
                  {"cosine", r.cosine},
                  {"penalty", r.penalty_triggered},
                  {"lrs", r.lrs_length}}
                 .dump()
          << '\n';
      return kExitOk;
    }
    if (serve_cmd->parsed()) return run_serve(host, port, serve_config, out);
    if (lrs_cmd->parsed()) {
      const auto r = non_overlapping ? repetition::longest_repeated_substring_non_overlapping(text)
                                     : repetition::longest_repeated_substring(text);
      json j = {{"length", r.length}};
      if (r.length > 0) {
        j["first"] = r.first;
        j["second"] = r.second;
        j["substring"] = text.substr(r.first, r.length);
      }
      out << j.dump() << '\n';
      return kExitOk;
    }
    if (recipe_cmd->parsed()) {
      std::vector<fs::path> dirs;
      if (!recipes_dir.empty()) dirs.emplace_back(recipes_dir);
      if (const char* env = std::getenv("RLSR_RECIPES_DIR")) dirs.emplace_back(env);
      dirs.emplace_back("recipes");
      dirs.emplace_back(RLSR_DEFAULT_RECIPES_DIR);
      const auto recipe = recipe::load_recipe(recipe::find_recipe(recipe_name, dirs));
      const fs::path dir = recipe_out.empty() ? fs::path("runs") / recipe_name : fs::path(recipe_out);
      const auto result = recipe::run_recipe(recipe, dir);
      for (const auto& f : result.failures) err << "envelope: " << f << '\n';
      out << json{{"recipe", result.name},
                  {"passed", result.passed},
                  {"wall_seconds", result.wall_seconds},
                  {"summary", (dir / "summary.json").string()}}
                 .dump()
          << '\n';
      return result.passed ? kExitOk : kExitUsage;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace rlsr::cli
