// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "rlsr/tensor.hpp"

namespace rlsr::ad {

enum class Primitive {
  kLeaf,
  kMatmul,
  kAdd,
  kAddBias,
  kMul,
  kScalarMul,
  kTanh,
  kGelu,
  kSoftmax,
  kLogSoftmax,
  kGatherRows,
  kConcat,
  kSlice,
  kSliceRows,
  kSum,
  kMean,
  kPick,
  kLayerNorm,
  kCausalAttention,
};

std::string_view primitive_name(Primitive p);

/// Handle to a node on a Tape. Only meaningful for the tape that issued it.
struct Var {
  std::size_t id = 0;
};

/// Define-by-run reverse-mode tape. Every primitive appends one node, so the
/// node order is a topological order and backward() is a single reverse sweep.
///
/// Shapes follow a strict policy: elementwise ops require identical shapes,
/// scalar_mul is the only implicit broadcast, and add_bias is the explicit
/// row-broadcast used for layer biases. Any other mismatch throws
/// DimensionError. A primitive whose output is not finite throws
/// NumericError.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var constant(Tensor value);
  Var input(Tensor value, bool requires_grad);
  // Backward accumulates into p.grad; p must outlive the tape.
  Var parameter(Parameter& p);

  // [n,k] x [k,m] -> [n,m]
  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  // x [n,d] + bias [d] on every row.
  Var add_bias(Var x, Var bias);
  Var mul(Var a, Var b);
  Var scalar_mul(Var a, double s);
  Var tanh(Var a);
  // Tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
  Var gelu(Var a);
  // Along the last axis of a rank-1 or rank-2 tensor.
  Var softmax(Var a);
  Var log_softmax(Var a);
  // table [V,d], one row per index -> [n,d]
  Var gather_rows(Var table, std::span<const int> rows);
  // Along the last axis; all parts must agree on the leading dimension.
  Var concat(std::span<const Var> parts);
  // Columns [begin, end) of the last axis.
  Var slice(Var a, std::size_t begin, std::size_t end);
  // Rows [begin, end) of a rank-2 tensor.
  Var slice_rows(Var a, std::size_t begin, std::size_t end);
  Var sum(Var a);
  Var mean(Var a);
  // x [n,m], one column index per row -> [n]
  Var pick(Var x, std::span<const int> cols);
  // Per-row normalisation of x [n,d] with gain and bias of shape [d].
  Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
  // qkv [T, 3d] packed as [q | k | v]; each head attends to positions <= i.
  Var causal_attention(Var qkv, std::size_t heads);

  // root must have shape [1].
  void backward(Var root);

  const Tensor& value(Var v) const;
  // Zeros when the node did not participate in the last backward pass.
  std::vector<double> grad(Var v) const;
  Primitive kind(Var v) const;
  std::span<const std::size_t> inputs(Var v) const;
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node;
  using BackwardFn = std::function<void(Tape&, const Node&)>;

  struct Node {
    Primitive kind = Primitive::kLeaf;
    std::vector<std::size_t> inputs;
    Tensor value;
    std::vector<double> grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    BackwardFn backward;
  };

  Var push(Primitive kind, std::vector<std::size_t> inputs, Tensor value,
           BackwardFn backward);
  const Node& node(Var v) const;
  std::vector<double>& grad_buffer(std::size_t id);
  bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  std::vector<Node> nodes_;
};

}  // namespace rlsr::ad
