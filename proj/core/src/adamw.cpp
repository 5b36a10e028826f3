// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#include "rlsr/adamw.hpp"

#include <cmath>
#include <string>

#include "rlsr/errors.hpp"

namespace rlsr::ad {

void adam_step(std::span<Parameter* const> params, OptimizerState& state) {
  if (state.step < 0) throw ContractError("adam_step: negative step counter");
  if (state.m.empty() && state.v.empty()) {
    for (const Parameter* p : params) {
      state.m.emplace_back(p->value.size(), 0.0);
      state.v.emplace_back(p->value.size(), 0.0);
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DimensionError("adam_step: optimizer tracks " + std::to_string(state.m.size()) +
                         " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Parameter& p = *params[k];
    if (state.m[k].size() != p.value.size() || state.v[k].size() != p.value.size() ||
        p.grad.size() != p.value.size()) {
      throw DimensionError("adam_step: moment/gradient size mismatch for " + p.name);
    }
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      double& w = p.value.data[i];
      w -= state.lr * state.weight_decay * w;
      w -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

double grad_norm(std::span<Parameter* const> params) {
  double total = 0.0;
  for (const Parameter* p : params)
    for (double g : p->grad) total += g * g;
  return std::sqrt(total);
}

double clip_grad_norm(std::span<Parameter* const> params, double max_norm) {
  const double norm = grad_norm(params);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (Parameter* p : params)
      for (double& g : p->grad) g *= s;
  }
  return norm;
}

}  // namespace rlsr::ad
