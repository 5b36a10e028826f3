// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#include "rlsr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "rlsr/errors.hpp"
#include "rlsr/rng.hpp"

namespace rlsr::eval {
namespace {

using nlohmann::json;

// Nearest-rank percentile of an ascending sequence.
double percentile(const std::vector<double>& sorted, double q) {
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
  return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  std::exception_ptr error;
  std::mutex error_mu;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += threads) fn(i);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
      }
    });
  }
  pool.clear();
  if (error) std::rethrow_exception(error);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

EvalReport evaluate(const data::Dataset& dataset, const Generator& generate,
                    const EvalOptions& opts) {
  if (dataset.empty()) throw UsageError("evaluation dataset is empty");
  const reward::RewardScorer scorer(opts.reward);
  const std::size_t n = dataset.size();
  std::vector<reward::RewardBreakdown> scores(n);
  std::vector<double> lens(n);
  std::vector<char> exact(n);
  parallel_for(n, opts.threads, [&](std::size_t i) {
    const auto& s = dataset.samples[i];
    const std::string response = generate(s, i);
    scores[i] = scorer.score(s.prompt, response, s.response);
    lens[i] = static_cast<double>(response.size());
    exact[i] = response == s.response;
  });

  EvalReport r;
  r.count = n;
  for (std::size_t i = 0; i < n; ++i) {
    r.rewards.push_back(scores[i].final_reward);
    r.mean_reward += scores[i].final_reward;
    r.mean_cosine += scores[i].cosine;
    r.penalty_rate += scores[i].penalty_triggered ? 1.0 : 0.0;
    r.exact_match += exact[i] ? 1.0 : 0.0;
    r.mean_len += lens[i];
  }
  const double dn = static_cast<double>(n);
  r.mean_reward /= dn;
  r.mean_cosine /= dn;
  r.penalty_rate /= dn;
  r.exact_match /= dn;
  r.mean_len /= dn;
  std::sort(lens.begin(), lens.end());
  r.p50_len = percentile(lens, 0.5);
  r.p90_len = percentile(lens, 0.9);
  return r;
}

std::vector<std::string> generate_all(const policy::Policy& policy, const data::Dataset& dataset,
                                      const EvalOptions& opts) {
  std::vector<std::string> out(dataset.size());
  const CounterRng seeds(opts.seed, 0xe7a1ULL);
  parallel_for(dataset.size(), opts.threads, [&](std::size_t i) {
    policy::SamplingOptions so;
    so.greedy = opts.greedy;
    so.temperature = opts.temperature;
    so.max_new_tokens = opts.max_new_tokens;
    so.seed = seeds.at(i);
    const auto prompt = data::prompt_ids(dataset.samples[i].prompt);
    if (prompt.size() >= policy.config().context) return;  // empty response
    out[i] = data::decode(policy.sample(prompt, so).front().ids);
  });
  return out;
}

EvalReport evaluate(const policy::Policy& policy, const data::Dataset& dataset,
                    const EvalOptions& opts) {
  if (dataset.empty()) throw UsageError("evaluation dataset is empty");
  const auto responses = generate_all(policy, dataset, opts);
  return evaluate(
      dataset, [&](const data::Sample&, std::size_t i) { return responses[i]; }, opts);
}

CompareReport compare(const policy::Policy& a, const policy::Policy& b,
                      const data::Dataset& dataset, const EvalOptions& opts) {
  if (a.config().vocab != b.config().vocab) {
    throw UsageError("checkpoints use different vocabularies");
  }
  const EvalReport ra = evaluate(a, dataset, opts);
  const EvalReport rb = evaluate(b, dataset, opts);
  CompareReport c;
  c.count = ra.count;
  c.rewards_a = ra.rewards;
  c.rewards_b = rb.rewards;
  std::size_t wa = 0, wb = 0;
  for (std::size_t i = 0; i < c.count; ++i) {
    if (c.rewards_a[i] > c.rewards_b[i]) ++wa;
    else if (c.rewards_b[i] > c.rewards_a[i]) ++wb;
  }
  const double n = static_cast<double>(c.count);
  c.win_a = static_cast<double>(wa) / n;
  c.win_b = static_cast<double>(wb) / n;
  c.ties = static_cast<double>(c.count - wa - wb) / n;
  return c;
}

std::string to_json(const EvalReport& r) {
  return json{{"count", r.count},
              {"mean_reward", r.mean_reward},
              {"mean_cosine", r.mean_cosine},
              {"exact_match", r.exact_match},
              {"penalty_rate", r.penalty_rate},
              {"mean_len", r.mean_len},
              {"p50_len", r.p50_len},
              {"p90_len", r.p90_len}}
      .dump();
}

std::string to_json(const CompareReport& r) {
  return json{{"count", r.count}, {"win_a", r.win_a}, {"win_b", r.win_b}, {"ties", r.ties}}.dump();
}

void append_csv(const std::filesystem::path& path, const std::string& label,
                const EvalReport& r) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot append to " + path.string());
  if (fresh) out << "label,count,mean_reward,mean_cosine,exact_match,penalty_rate,mean_len,p50_len,p90_len\n";
  out << label << ',' << r.count << ',' << fmt(r.mean_reward) << ',' << fmt(r.mean_cosine) << ','
      << fmt(r.exact_match) << ',' << fmt(r.penalty_rate) << ',' << fmt(r.mean_len) << ','
      << fmt(r.p50_len) << ',' << fmt(r.p90_len) << '\n';
}

}  // namespace rlsr::eval
