// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <string>

#include "rlsr/encoder.hpp"
#include "rlsr/policy.hpp"
#include "rlsr/repetition.hpp"
#include "rlsr/reward.hpp"
#include "rlsr/rng.hpp"
#include "rlsr/tape.hpp"
#include "rlsr/vocab.hpp"

namespace {

using namespace rlsr;

std::string random_text(std::size_t n, std::size_t alphabet, std::uint64_t seed) {
  CounterRng rng(seed, 0);
  std::string s(n, ' ');
  for (auto& c : s) c = static_cast<char>('a' + rng.below(alphabet));
  return s;
}

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  CounterRng rng(1, 0);
  ad::Tensor a = ad::Tensor::zeros({n, n}), b = ad::Tensor::zeros({n, n});
  for (auto& x : a.data) x = rng.normal();
  for (auto& x : b.data) x = rng.normal();
  for (auto _ : state) {
    ad::Tape t;
    const ad::Var va = t.input(a, true), vb = t.input(b, true);
    t.backward(t.sum(t.matmul(va, vb)));
    benchmark::DoNotOptimize(t.grad(va).data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(3 * n * n * n));
}
BENCHMARK(BM_MatmulBackward)->Arg(32)->Arg(64)->Arg(128);

void BM_LongestRepeat(benchmark::State& state) {
  const std::string s = random_text(static_cast<std::size_t>(state.range(0)), 4, 2);
  for (auto _ : state) benchmark::DoNotOptimize(repetition::longest_repeated_substring(s));
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LongestRepeat)->Arg(256)->Arg(4096)->Arg(65536);

void BM_Embed(benchmark::State& state) {
  const std::string s = random_text(static_cast<std::size_t>(state.range(0)), 26, 3);
  const embed::EncoderConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(embed::embed(s, cfg));
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Embed)->Arg(64)->Arg(512)->Arg(2048);

void BM_RewardScore(benchmark::State& state) {
  const std::string r = random_text(512, 26, 4), ref = random_text(512, 26, 5);
  const reward::RewardScorer scorer({});
  for (auto _ : state) benchmark::DoNotOptimize(scorer.score("p", r, ref));
}
BENCHMARK(BM_RewardScore);

policy::PolicyConfig small_policy() {
  policy::PolicyConfig c;
  c.d_model = 64;
  c.layers = 2;
  c.heads = 4;
  c.context = 64;
  return c;
}

void BM_PolicyForwardBackward(benchmark::State& state) {
  policy::Policy p(small_policy(), policy::InitOptions{.seed = 1});
  std::vector<int> tokens(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < tokens.size(); ++i) tokens[i] = static_cast<int>(97 + i % 26);
  for (auto _ : state) {
    ad::Tape t;
    p.zero_grad();
    t.backward(t.mean(t.log_softmax(p.forward(t, tokens))));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PolicyForwardBackward)->Arg(16)->Arg(64);

void BM_PolicySample(benchmark::State& state) {
  policy::Policy p(small_policy(), policy::InitOptions{.seed = 1, .zero_output_head = false});
  const auto prompt = data::prompt_ids("copy: abcdef");
  policy::SamplingOptions so{.max_new_tokens = 32, .count = 8, .seed = 7};
  for (auto _ : state) benchmark::DoNotOptimize(p.sample(prompt, so));
}
BENCHMARK(BM_PolicySample);

}  // namespace

BENCHMARK_MAIN();
