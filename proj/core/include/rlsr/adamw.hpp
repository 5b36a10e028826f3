// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rlsr/tensor.hpp"

namespace rlsr::ad {

struct OptimizerState {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  std::int64_t step = 0;
  // One entry per parameter, in the order passed to adam_step.
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  bool operator==(const OptimizerState&) const = default;
};

// Bias-corrected AdamW with decoupled weight decay. Moments are allocated on
// the first call and must keep matching the parameter sizes afterwards.
void adam_step(std::span<Parameter* const> params, OptimizerState& state);

// Global L2 norm of all parameter gradients.
double grad_norm(std::span<Parameter* const> params);

// Scales gradients so the global norm does not exceed max_norm. Returns the
// norm before clipping.
double clip_grad_norm(std::span<Parameter* const> params, double max_norm);

}  // namespace rlsr::ad
