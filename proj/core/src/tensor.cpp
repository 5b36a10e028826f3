// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#include "rlsr/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "rlsr/errors.hpp"

namespace rlsr::ad {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape s, std::vector<double> values)
    : shape(std::move(s)), data(std::move(values)) {
  if (shape.empty() ||
      std::any_of(shape.begin(), shape.end(), [](auto d) { return d == 0; })) {
    throw DimensionError("tensor shape must be non-empty with positive dims, got " +
                         to_string(shape));
  }
  if (numel(shape) != data.size()) {
    throw DimensionError("tensor shape " + to_string(shape) + " does not match " +
                         std::to_string(data.size()) + " values");
  }
}

Tensor Tensor::zeros(Shape s) {
  const auto n = numel(s);
  return Tensor(std::move(s), std::vector<double>(n, 0.0));
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw DimensionError("rows() on rank-" + std::to_string(rank()) + " tensor");
  return shape[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw DimensionError("cols() on rank-" + std::to_string(rank()) + " tensor");
  return shape[1];
}

Parameter::Parameter(std::string n, Tensor v)
    : name(std::move(n)), value(std::move(v)), grad(value.size(), 0.0) {}

void Parameter::zero_grad() {
  grad.assign(value.size(), 0.0);
}

}  // namespace rlsr::ad
