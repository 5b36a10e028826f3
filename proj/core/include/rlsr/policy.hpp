// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "rlsr/tape.hpp"
#include "rlsr/tensor.hpp"
#include "rlsr/vocab.hpp"

namespace rlsr::policy {

struct PolicyConfig {
  std::size_t d_model = 64;
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t ffn_mult = 4;
  std::size_t context = 256;
  std::size_t vocab = data::kVocabSize;

  void validate() const;
  bool operator==(const PolicyConfig&) const = default;
};

struct InitOptions {
  std::uint64_t seed = 0;
  double stddev = 0.02;
  // A zero output head makes every initial next-token distribution uniform.
  bool zero_output_head = true;
};

struct LogProbs {
  double total = 0.0;
  std::vector<double> per_token;
};

struct SamplingOptions {
  double temperature = 1.0;
  std::size_t max_new_tokens = 128;
  std::size_t count = 1;
  std::uint64_t seed = 0;
  // Argmax decoding; temperature and seed are ignored.
  bool greedy = false;
};

struct SampledResponse {
  data::TokenIds ids;  // ends with EOS unless truncated
  bool truncated = false;
};

// Tape handles for the response positions of one sequence.
struct ResponseLogProbs {
  ad::Var token_log_probs;  // [N]
  ad::Var log_softmax;      // [N, vocab]
};

class PolicySnapshot;

/// Pre-norm causal transformer over the byte vocabulary with learned
/// positional embeddings and an untied output projection.
class Policy {
 public:
  Policy(PolicyConfig cfg, const InitOptions& init);
  // Parameters must match the layout init would produce (names and shapes).
  Policy(PolicyConfig cfg, std::vector<ad::Parameter> params);

  const PolicyConfig& config() const { return cfg_; }
  std::vector<ad::Parameter>& parameters() { return params_; }
  const std::vector<ad::Parameter>& parameters() const { return params_; }
  std::vector<ad::Parameter*> parameter_ptrs();
  std::size_t num_parameters() const;
  void zero_grad();

  // Logits [T, vocab] with gradients flowing into the parameters.
  ad::Var forward(ad::Tape& tape, std::span<const int> tokens);
  // Logits only; the output at position i depends on tokens[0..i].
  ad::Tensor forward_logits(std::span<const int> tokens) const;

  // Log-probabilities of each response token given all earlier tokens.
  // Prompt positions are excluded. Throws ContractError on over-length input.
  ResponseLogProbs response_log_probs(ad::Tape& tape, std::span<const int> prompt,
                                      std::span<const int> response);
  ResponseLogProbs response_log_probs(ad::Tape& tape, std::span<const int> prompt,
                                      std::span<const int> response) const;
  LogProbs sequence_log_prob(std::span<const int> prompt, std::span<const int> response) const;

  // Ancestral sampling; sample i uses the counter stream (seed, i, step).
  std::vector<SampledResponse> sample(std::span<const int> prompt,
                                      const SamplingOptions& opts) const;

  PolicySnapshot snapshot_reference() const;

  bool operator==(const Policy& other) const;

 private:
  void build_layout(const InitOptions* init);

  PolicyConfig cfg_;
  std::vector<ad::Parameter> params_;
};

/// Immutable copy of a policy, used as the KL anchor.
class PolicySnapshot {
 public:
  explicit PolicySnapshot(Policy policy);

  const Policy& policy() const { return *policy_; }
  LogProbs sequence_log_prob(std::span<const int> prompt, std::span<const int> response) const {
    return policy_->sequence_log_prob(prompt, response);
  }
  ad::Tensor forward_logits(std::span<const int> tokens) const {
    return policy_->forward_logits(tokens);
  }
  PolicySnapshot snapshot_reference() const { return *this; }

 private:
  std::shared_ptr<const Policy> policy_;
};

// Mean over response positions of sum_v p_live(v) (log p_live(v) - log p_ref(v)),
// i.e. the exact per-token KL on the given sequence.
double exact_token_kl(const Policy& live, const Policy& reference, std::span<const int> prompt,
                      std::span<const int> response);

}  // namespace rlsr::policy
