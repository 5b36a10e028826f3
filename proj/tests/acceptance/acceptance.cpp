// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails. Pass criterion numbers as arguments
// to run a subset.

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include "cli.hpp"
#include "oracles.hpp"
#include "rlsr/checkpoint.hpp"
#include "rlsr/eval.hpp"
#include "rlsr/log.hpp"
#include "rlsr/recipe.hpp"
#include "rlsr/repetition.hpp"
#include "rlsr/reward.hpp"
#include "rlsr/reward_server.hpp"
#include "rlsr/tape.hpp"
#include "rlsr/trainer.hpp"

namespace fs = std::filesystem;
using namespace rlsr;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
  // Time charged to the criterion when it differs from the call's duration.
  double seconds = -1.0;
};

double train_seconds(const recipe::StageResult& st) {
  double ms = 0.0;
  for (const auto& m : st.metrics) ms += m.wall_ms;
  return ms / 1000.0;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

const fs::path& work_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::path(RLSR_ACCEPTANCE_WORK_DIR);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

recipe::Recipe load_named(const std::string& name) {
  return recipe::load_recipe(recipe::find_recipe(name, {RLSR_RECIPES_DIR}));
}

// ---------------------------------------------------------------- criterion 1

struct MicroModel {
  std::vector<ad::Parameter> params;
  std::function<ad::Var(ad::Tape&, std::vector<ad::Var>&)> loss;
};

ad::Parameter random_param(const std::string& name, ad::Shape shape, CounterRng& rng) {
  ad::Tensor t = ad::Tensor::zeros(std::move(shape));
  for (auto& x : t.data) x = rng.normal() * 0.7;
  return ad::Parameter(name, std::move(t));
}

MicroModel make_micro_model(std::uint64_t seed) {
  CounterRng rng(seed, 77);
  MicroModel m;
  const auto kind = seed % 3;
  if (kind == 0) {
    // Two-layer classifier with a log-softmax cross-entropy head.
    const std::size_t n = 2 + rng.below(3), din = 2 + rng.below(4), h = 2 + rng.below(6), c = 2 + rng.below(4);
    ad::Tensor x = ad::Tensor::zeros({n, din});
    for (auto& v : x.data) v = rng.normal();
    std::vector<int> labels(n);
    for (auto& l : labels) l = static_cast<int>(rng.below(c));
    const bool use_gelu = rng.below(2) == 1;
    m.params.push_back(random_param("w1", {din, h}, rng));
    m.params.push_back(random_param("b1", {h}, rng));
    m.params.push_back(random_param("w2", {h, c}, rng));
    m.params.push_back(random_param("b2", {c}, rng));
    m.loss = [x, labels, use_gelu, n](ad::Tape& t, std::vector<ad::Var>& p) {
      const ad::Var in = t.constant(x);
      ad::Var hid = t.add_bias(t.matmul(in, p[0]), p[1]);
      hid = use_gelu ? t.gelu(hid) : t.tanh(hid);
      const ad::Var logits = t.add_bias(t.matmul(hid, p[2]), p[3]);
      return t.scalar_mul(t.sum(t.pick(t.log_softmax(logits), labels)), -1.0 / static_cast<double>(n));
    };
  } else if (kind == 1) {
    // Pre-norm causal self-attention block with a residual connection.
    const std::size_t heads = 1 + rng.below(2), d = 2 * heads + 2 * rng.below(2), T = 2 + rng.below(4);
    ad::Tensor x = ad::Tensor::zeros({T, d}), w = ad::Tensor::zeros({T, d});
    for (auto& v : x.data) v = rng.normal();
    for (auto& v : w.data) v = rng.normal();
    m.params.push_back(random_param("ln.gain", {d}, rng));
    m.params.push_back(random_param("ln.bias", {d}, rng));
    m.params.push_back(random_param("w_qkv", {d, 3 * d}, rng));
    m.params.push_back(random_param("b_qkv", {3 * d}, rng));
    m.params.push_back(random_param("w_out", {d, d}, rng));
    m.loss = [x, w, heads](ad::Tape& t, std::vector<ad::Var>& p) {
      const ad::Var in = t.constant(x);
      const ad::Var normed = t.layer_norm(in, p[0], p[1]);
      const ad::Var att = t.causal_attention(t.add_bias(t.matmul(normed, p[2]), p[3]), heads);
      const ad::Var out = t.add(in, t.matmul(att, p[4]));
      return t.mean(t.mul(t.tanh(out), t.constant(w)));
    };
  } else {
    // Gated mixture: softmax over a slice, concat, elementwise products.
    const std::size_t n = 2 + rng.below(3), d = 2 + rng.below(4);
    std::vector<int> rows(n + 1);
    for (auto& r : rows) r = static_cast<int>(rng.below(5));
    m.params.push_back(random_param("table", {5, 2 * d}, rng));
    m.params.push_back(random_param("proj", {2 * d, d}, rng));
    m.params.push_back(random_param("scale", {d}, rng));
    m.loss = [rows, d, n](ad::Tape& t, std::vector<ad::Var>& p) {
      const ad::Var emb = t.gather_rows(p[0], rows);
      const ad::Var head = t.slice_rows(emb, 0, n);
      const ad::Var gate = t.softmax(t.slice(head, 0, d));
      const ad::Var val = t.slice(head, d, 2 * d);
      const std::vector<ad::Var> parts{t.mul(gate, val), val};
      const ad::Var mixed = t.matmul(t.concat(parts), p[1]);
      const ad::Var scaled = t.add_bias(t.scalar_mul(mixed, 0.5), p[2]);
      return t.sum(t.mul(scaled, t.tanh(scaled)));
    };
  }
  return m;
}

double micro_loss(MicroModel& m) {
  ad::Tape t;
  std::vector<ad::Var> vars;
  for (auto& p : m.params) vars.push_back(t.constant(p.value));
  return t.value(m.loss(t, vars))[0];
}

Outcome criterion1() {
  const int models = 24;
  const double h = 1e-5;
  double worst = 0.0;
  std::size_t max_params = 0, checked = 0;
  for (int s = 0; s < models; ++s) {
    MicroModel m = make_micro_model(static_cast<std::uint64_t>(s));
    std::size_t count = 0;
    for (auto& p : m.params) {
      p.zero_grad();
      count += p.value.size();
    }
    max_params = std::max(max_params, count);
    if (count > 200) return {false, "micro-model " + std::to_string(s) + " has " + std::to_string(count) + " params"};
    {
      ad::Tape t;
      std::vector<ad::Var> vars;
      for (auto& p : m.params) vars.push_back(t.parameter(p));
      t.backward(m.loss(t, vars));
    }
    for (auto& p : m.params) {
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double x0 = p.value.data[i];
        p.value.data[i] = x0 + h;
        const double up = micro_loss(m);
        p.value.data[i] = x0 - h;
        const double down = micro_loss(m);
        p.value.data[i] = x0;
        const double num = (up - down) / (2 * h);
        const double err = std::abs(num - p.grad[i]) / std::max({std::abs(num), std::abs(p.grad[i]), 1e-6});
        worst = std::max(worst, err);
        ++checked;
      }
    }
  }
  return {worst <= 1e-4, std::to_string(models) + " micro-models (<= " + std::to_string(max_params) +
                             " params), " + std::to_string(checked) + " components, worst rel err " +
                             fmt("%.2e", worst) + " (<= 1e-4)"};
}

// ---------------------------------------------------------------- criterion 2

Outcome criterion2() {
  const reward::RewardScorer scorer({});
  CounterRng rng(2, 0);
  double worst_identity = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::string r = testing::random_words(rng, 2 + rng.below(30));
    worst_identity = std::max(worst_identity, std::abs(scorer.score("prompt", r, r).final_reward - 1.0));
  }
  double lo = 1.0, hi = -1.0;
  for (int i = 0; i < 2000; ++i) {
    std::string resp;
    switch (i % 4) {
      case 0: resp = testing::random_words(rng, rng.below(40)); break;
      case 1: resp = testing::random_string(rng, rng.below(400), 256); break;
      case 2: {
        const auto unit = testing::random_string(rng, 1 + rng.below(4), 26);
        while (resp.size() < 150 + rng.below(300)) resp += unit;
        break;
      }
      default: resp = testing::random_string(rng, rng.below(100), 2); break;
    }
    const std::string ref = i % 3 == 0 ? testing::random_words(rng, 1 + rng.below(30))
                                       : testing::random_string(rng, 1 + rng.below(1500), 26);
    const double f = scorer.score("p", resp, ref).final_reward;
    lo = std::min(lo, f);
    hi = std::max(hi, f);
  }
  const bool ok = worst_identity <= 1e-9 && lo >= -1.0 && hi <= 1.0;
  return {ok, "identity worst |r-1| " + fmt("%.1e", worst_identity) + " over 100; 2000 random rewards in [" +
                  fmt("%.4f", lo) + ", " + fmt("%.4f", hi) + "]"};
}

// ---------------------------------------------------------------- criterion 3

Outcome criterion3() {
  CounterRng rng(3, 0);
  const std::size_t alphabets[] = {2, 4, 26, 256};
  int mismatches = 0, bad_witness = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t alphabet = alphabets[i % 4];
    const std::string s = testing::random_string(rng, rng.below(201), alphabet, alphabet >= 256 ? 0 : 'a');
    const auto fast = repetition::longest_repeated_substring(s);
    if (fast.length != testing::brute_force_lrs(s)) ++mismatches;
    if (fast.length > 0 && (fast.first == fast.second ||
                            s.compare(fast.first, fast.length, s, fast.second, fast.length) != 0)) {
      ++bad_witness;
    }
  }
  return {mismatches == 0 && bad_witness == 0,
          "1000 strings (len <= 200, alphabets 2/4/26/256): " + std::to_string(mismatches) +
              " length mismatches, " + std::to_string(bad_witness) + " invalid witnesses"};
}

// ---------------------------------------------------------------- criterion 4

Outcome criterion4() {
  std::string ab;
  for (int i = 0; i < 200; ++i) ab += "ab";
  CounterRng rng(4, 0);
  const std::string ref100 = testing::random_string(rng, 100, 26);
  const auto a = reward::score("p", ab, ref100, {});

  // Response whose longest repeat is exactly 150 bytes.
  std::string unit;
  std::string resp;
  for (;;) {
    unit = testing::random_string(rng, 150, 26);
    resp = unit + "#" + unit;
    if (repetition::longest_repeated_substring(resp).length == 150) break;
  }
  const std::string ref2000 = testing::random_string(rng, 2000, 26);
  const auto b = reward::score("p", resp, ref2000, {});
  const bool ok = a.penalty_triggered && a.final_reward == -1.0 && a.lrs_length == 398 &&
                  !b.penalty_triggered && b.lrs_length == 150 && b.final_reward == b.cosine;
  return {ok, "\"ab\"x200 vs 100 B: lrs " + std::to_string(a.lrs_length) + ", reward " +
                  fmt("%.17g", a.final_reward) + "; lrs " + std::to_string(b.lrs_length) +
                  " vs 2000 B: penalty " + (b.penalty_triggered ? "on" : "off")};
}

// ---------------------------------------------------------------- criterion 5

Outcome criterion5() {
  CounterRng rng(5, 0);
  const std::size_t sizes[] = {2, 4, 8};
  double worst_mean = 0.0, worst_std = 0.0;
  int normalized = 0, degenerate_bad = 0, degenerate = 0;
  for (int i = 0; i < 10000; ++i) {
    const std::size_t g = sizes[rng.below(3)];
    std::vector<double> r(g);
    // Spreads from 1e-4 up to 1 exercise the stabilizer at the boundary.
    const double spread = std::pow(10.0, -4.0 + 4.0 * rng.uniform());
    const double base = rng.uniform() * 2 - 1;
    for (auto& x : r) x = base + spread * (rng.uniform() - 0.5);
    if (i % 50 == 0) {
      std::fill(r.begin(), r.end(), base);
      ++degenerate;
    }
    for (auto mode : {train::AdvantageNorm::kMeanOnly, train::AdvantageNorm::kMeanStd}) {
      const auto a = train::compute_group_advantages(r, mode);
      worst_mean = std::max(worst_mean, std::abs(std::accumulate(a.begin(), a.end(), 0.0) / g));
      if (i % 50 == 0) {
        for (double x : a) degenerate_bad += x != 0.0;
        continue;
      }
      if (mode == train::AdvantageNorm::kMeanStd) {
        const double mr = std::accumulate(r.begin(), r.end(), 0.0) / g;
        double vr = 0.0, va = 0.0;
        for (std::size_t k = 0; k < g; ++k) {
          vr += (r[k] - mr) * (r[k] - mr);
          va += a[k] * a[k];
        }
        if (std::sqrt(vr / g) > 1e-4) {
          worst_std = std::max(worst_std, std::abs(std::sqrt(va / g) - 1.0));
          ++normalized;
        }
      }
    }
  }
  const bool ok = worst_mean <= 1e-9 && worst_std <= 1e-3 && degenerate_bad == 0;
  return {ok, "10^4 groups: max |mean A| " + fmt("%.1e", worst_mean) + ", max |std A - 1| " +
                  fmt("%.1e", worst_std) + " over " + std::to_string(normalized) + " groups, " +
                  std::to_string(degenerate) + " equal-reward groups all zero: " +
                  (degenerate_bad == 0 ? "yes" : "no")};
}

// ------------------------------------------------------------- criteria 7 + 8

struct CopyRun {
  bool ran = false;
  recipe::RecipeResult result;
  fs::path dir;
};

CopyRun& copy_run() {
  static CopyRun run;
  if (!run.ran) {
    run.ran = true;
    run.dir = work_dir() / "copy-rlsr";
    run.result = recipe::run_recipe(load_named("copy-rlsr"), run.dir);
  }
  return run;
}

Outcome criterion7() {
  const auto recipe = load_named("copy-rlsr");
  auto& run = copy_run();
  const auto* sft = run.result.seeds.front().stage("sft");
  const auto& stage_cfg = recipe.stages.front();
  const auto cfg = train::apply_json(train::TrainConfig::defaults(stage_cfg.mode), stage_cfg.config_json);
  const bool ok = sft->report.exact_match >= 0.9 && recipe.data.n >= 2000 && cfg.max_steps <= 2000;
  return {ok,
          "copy, " + std::to_string(recipe.data.n) + " samples, " + std::to_string(cfg.max_steps) +
                  " steps: held-out exact-match " + fmt("%.3f", sft->report.exact_match) + " (>= 0.9) on " +
                  std::to_string(sft->report.count) + " prompts",
          train_seconds(*sft)};
}

Outcome criterion8() {
  const auto recipe = load_named("copy-rlsr");
  auto& run = copy_run();
  const auto* rl = run.result.seeds.front().stage("rlsr");
  const double dip = recipe::metric_value(*rl, "reward_dip", 500);
  // Windowed training reward: mean of the last 500 steps vs the first 500.
  const auto& m = rl->metrics;
  const std::size_t w = std::min<std::size_t>(500, m.size() / 2);
  double first = 0, last = 0;
  for (std::size_t i = 0; i < w; ++i) {
    first += m[i].mean_reward;
    last += m[m.size() - w + i].mean_reward;
  }
  first /= static_cast<double>(w);
  last /= static_cast<double>(w);
  std::ostringstream curve;
  for (const auto& [step, r] : rl->reward_curve) curve << (curve.tellp() ? " " : "") << step << ":" << fmt("%.3f", r);
  const bool ok = rl->report.mean_reward >= 0.95 && dip <= 0.05 && last >= 0.95 * first && m.size() <= 1000;
  return {ok, std::to_string(m.size()) + " rlsr steps from sft init: held-out reward " +
                  fmt("%.4f", rl->report.mean_reward) + " (>= 0.95), max dip " + fmt("%.4f", dip) +
                  " (<= 0.05), train reward windows " + fmt("%.4f", first) + " -> " + fmt("%.4f", last) +
                  "; held-out curve " + curve.str(),
          train_seconds(*rl)};
}

// ---------------------------------------------------------------- criterion 6

Outcome criterion6() {
  auto& run = copy_run();
  const fs::path sft_ckpt = run.result.seeds.front().stage("sft")->out_dir / "final";
  const auto recipe = load_named("copy-rlsr");
  const auto data = data::split_held_out(data::generate_task(recipe.data), recipe.held_out_fraction);
  const fs::path data_file = work_dir() / "copy-train.jsonl";
  data::write_jsonl(data_file, data.train);

  // Step-0 KL through the CLI.
  const fs::path cli_out = work_dir() / "kl-wiring";
  fs::remove_all(cli_out);
  const fs::path cfg_file = work_dir() / "kl-wiring.json";
  const auto& rl_stage = recipe.stages.at(1);
  std::ofstream(cfg_file) << rl_stage.config_json;
  std::ostringstream out, err;
  const int code = cli::cmd_main({"rlsr", "train-rlsr", "--data", data_file.string(), "--config", cfg_file.string(),
                                  "--init", sft_ckpt.string(), "--out", cli_out.string(), "--steps", "2"},
                                 out, err);
  std::ifstream csv(cli_out / "metrics.csv");
  std::string header, row;
  std::getline(csv, header);
  std::getline(csv, row);
  std::vector<std::string> cols;
  std::stringstream ss(row);
  for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
  const bool kl0 = code == 0 && cols.size() > 4 && cols[4] == "0";

  // Ratio on the first mini-batch after every collection, and beta = 10 runs.
  auto ck = ckpt::load(sft_ckpt);
  train::TrainConfig cfg = train::apply_json(train::TrainConfig::defaults(train::Mode::kRlsr), rl_stage.config_json);
  cfg.kl_coef = 10.0;
  cfg.seed = 6;
  policy::Policy live = ck.policy;
  train::RlsrTrainer trainer(live, ck.policy.snapshot_reference(), cfg);
  data::Dataset prompts = data::shuffled(data.train, 6);
  double worst_ratio = 0.0, last_kl_metric = 0.0;
  for (std::size_t step = 0; step < 100; ++step) {
    std::vector<data::Sample> batch;
    for (std::size_t i = 0; i < cfg.batch_size; ++i)
      batch.push_back(prompts.samples[(step * cfg.batch_size + i) % prompts.size()]);
    last_kl_metric = trainer.step(batch).mean_kl;
    worst_ratio = std::max(worst_ratio, trainer.diagnostics().first_minibatch_ratio_deviation);
  }
  // Exact per-token KL on fresh samples from the trained policy.
  double exact = 0.0;
  std::size_t n = 0;
  policy::SamplingOptions so{.temperature = cfg.temperature, .max_new_tokens = cfg.max_new_tokens, .count = 4, .seed = 99};
  for (std::size_t i = 0; i < 50; ++i) {
    const auto prompt = data::prompt_ids(data.held_out.samples[i].prompt);
    for (const auto& r : live.sample(prompt, so)) {
      exact += policy::exact_token_kl(live, ck.policy, prompt, r.ids);
      ++n;
    }
  }
  exact /= static_cast<double>(n);
  const bool ok = kl0 && worst_ratio <= 1e-10 && exact <= 0.05 && last_kl_metric <= 0.05;
  return {ok, std::string("step-0 KL via train-rlsr --init: ") + (cols.size() > 4 ? cols[4] : "?") +
                  "; max |ratio-1| on first mini-batch " + fmt("%.1e", worst_ratio) + " over 100 steps; beta=10 after 100 steps: exact KL " +
                  fmt("%.5f", exact) + " nats, k1 metric " + fmt("%.5f", last_kl_metric) + " (<= 0.05)"};
}

// ---------------------------------------------------------------- criterion 9

std::size_t total_updates(const recipe::StageResult& st) {
  std::size_t n = 0;
  for (const auto& m : st.metrics) n += m.updates;
  return n;
}

Outcome criterion9() {
  const auto recipe = load_named("keywords-rlsr-vs-sft");
  const auto res = recipe::run_recipe(recipe, work_dir() / "keywords-rlsr-vs-sft");
  std::ostringstream detail;
  std::size_t wins = 0;
  bool budget_ok = true;
  for (const auto& s : res.seeds) {
    const auto* rl = s.stage("rlsr");
    const auto* sft = s.stage("sft-continued");
    const std::size_t ru = total_updates(*rl), su = total_updates(*sft);
    budget_ok = budget_ok && ru <= su;
    wins += rl->report.mean_reward > sft->report.mean_reward;
    detail << "seed " << s.seed << ": rlsr " << fmt("%.4f", rl->report.mean_reward) << " (" << ru
           << " updates) vs sft " << fmt("%.4f", sft->report.mean_reward) << " (" << su << " updates); ";
  }
  const auto* init = res.seeds.front().stage("sft-init");
  detail << "shared init " << fmt("%.4f", init->report.mean_reward) << "; " << wins << "/" << res.seeds.size()
         << " seeds favour rlsr (need >= 2)";
  return {res.passed && wins >= 2 && budget_ok, detail.str()};
}

// --------------------------------------------------------------- criterion 10

Outcome criterion10() {
  int pipefd[2];
  if (pipe(pipefd) != 0) return {false, "pipe failed"};
  const pid_t pid = fork();
  if (pid == 0) {
    dup2(pipefd[1], STDOUT_FILENO);
    close(pipefd[0]);
    close(pipefd[1]);
    execl(RLSR_CLI_PATH, RLSR_CLI_PATH, "serve-reward", "--port", "0", static_cast<char*>(nullptr));
    _exit(127);
  }
  close(pipefd[1]);
  std::string line;
  char c;
  while (read(pipefd[0], &c, 1) == 1 && c != '\n') line += c;
  close(pipefd[0]);
  const auto colon = line.rfind(':');
  if (line.rfind("listening ", 0) != 0 || colon == std::string::npos) {
    kill(pid, SIGKILL);
    waitpid(pid, nullptr, 0);
    return {false, "server did not report a port: '" + line + "'"};
  }
  const auto port = static_cast<std::uint16_t>(std::stoi(line.substr(colon + 1)));

  int mismatches = 0;
  {
    reward::RewardClient client("127.0.0.1", port);
    const reward::RewardScorer local({});
    CounterRng rng(10, 0);
    for (int i = 0; i < 1000; ++i) {
      const std::string p = testing::random_string(rng, rng.below(40), i % 3 == 0 ? 256 : 26);
      std::string r;
      if (i % 7 == 0) {
        while (r.size() < 300) r += "ab";
      } else {
        r = i % 2 ? testing::random_words(rng, rng.below(20)) : testing::random_string(rng, rng.below(200), 256);
      }
      const std::string ref = testing::random_string(rng, 1 + rng.below(200), i % 5 == 0 ? 256 : 26);
      if (!(client.score(p, r, ref) == local.score(p, r, ref))) ++mismatches;
    }
  }
  kill(pid, SIGTERM);
  int status = 0;
  waitpid(pid, &status, 0);
  const bool clean = WIFEXITED(status) && WEXITSTATUS(status) == 0;
  return {mismatches == 0 && clean, "1000 triples via serve-reward on port " + std::to_string(port) + ": " +
                                        std::to_string(mismatches) + " bit mismatches; SIGTERM shutdown " +
                                        (clean ? "clean" : "unclean")};
}

// --------------------------------------------------------------- criterion 11

std::string read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Drops the trailing wall_ms column from every metrics row.
std::string mask_wall_ms(const std::string& csv) {
  std::istringstream in(csv);
  std::string out, line;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + '\n';
  return out;
}

Outcome criterion11() {
  const auto recipe = load_named("determinism-smoke");
  const fs::path a = work_dir() / "determinism-a", b = work_dir() / "determinism-b";
  fs::remove_all(a);
  fs::remove_all(b);
  recipe::run_recipe(recipe, a);
  recipe::run_recipe(recipe, b);
  std::size_t files = 0, differing = 0;
  std::string first_diff;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), a);
    if (rel == "summary.json") continue;  // carries wall_seconds
    std::string x = read_all(entry.path()), y = read_all(b / rel);
    if (rel.filename() == "metrics.csv") {
      x = mask_wall_ms(x);
      y = mask_wall_ms(y);
    }
    ++files;
    if (x != y) {
      ++differing;
      if (first_diff.empty()) first_diff = rel.string();
    }
  }
  std::size_t checkpoints = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a))
    if (entry.path().filename() == "params.bin") ++checkpoints;
  return {differing == 0 && checkpoints > 0,
          "two runs of determinism-smoke: " + std::to_string(files) + " files compared (" +
              std::to_string(checkpoints) + " checkpoints), " + std::to_string(differing) + " differ" +
              (first_diff.empty() ? "" : " (first: " + first_diff + ")")};
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  Outcome (*fn)();
};

}  // namespace

int main(int argc, char** argv) {
  log::init_from_env();
  if (!std::getenv("RLSR_LOG")) log::set_level(log::Level::kQuiet);
  const Criterion criteria[] = {
      {1, "gradient correctness", 60, criterion1},
      {2, "reward identity and bounds", 10, criterion2},
      {3, "LRS oracle equivalence", 120, criterion3},
      {4, "penalty rule", 1, criterion4},
      {5, "group advantage identities", 10, criterion5},
      {7, "SFT convergence on copy", 20 * 60, criterion7},
      {8, "RLSR convergence on copy", 30 * 60, criterion8},
      {6, "PPO/KL wiring", 5 * 60, criterion6},
      {9, "RLSR vs SFT on keywords", 60 * 60, criterion9},
      {10, "wire/in-process equivalence", 30, criterion10},
      {11, "determinism", 15 * 60, criterion11},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (o.seconds >= 0.0) secs = o.seconds;
    const bool in_budget = secs <= c.budget_seconds;
    if (!in_budget) o.pass = false;
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << o.detail
              << " [" << fmt("%.1f", secs) << " s, budget " << fmt("%.0f", c.budget_seconds) << " s]"
              << std::endl;
  }
  std::cout << (failed == 0 ? "all acceptance criteria passed" : std::to_string(failed) + " criteria failed")
            << std::endl;
  return failed == 0 ? 0 : 1;
}
