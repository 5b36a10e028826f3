// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#include "rlsr/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "rlsr/errors.hpp"

namespace rlsr::ad {
namespace {

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

void check_finite(const Tensor& t, Primitive kind) {
  for (double v : t.data) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("non-finite output from ") +
                         std::string(primitive_name(kind)));
    }
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, std::string_view op) {
  if (a.shape != b.shape) {
    throw DimensionError(std::string(op) + ": shape " + to_string(a.shape) +
                         " vs " + to_string(b.shape));
  }
}

void require_rank2(const Tensor& a, std::string_view op) {
  if (a.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected rank-2 tensor, got " +
                         to_string(a.shape));
  }
}

// Rows and columns of the last-axis view of a rank-1 or rank-2 tensor.
std::pair<std::size_t, std::size_t> last_axis_view(const Tensor& a, std::string_view op) {
  if (a.rank() == 1) return {1, a.shape[0]};
  if (a.rank() == 2) return {a.shape[0], a.shape[1]};
  throw DimensionError(std::string(op) + ": rank must be 1 or 2, got " + to_string(a.shape));
}

}  // namespace

std::string_view primitive_name(Primitive p) {
  switch (p) {
    case Primitive::kLeaf: return "leaf";
    case Primitive::kMatmul: return "matmul";
    case Primitive::kAdd: return "add";
    case Primitive::kAddBias: return "add-bias";
    case Primitive::kMul: return "mul";
    case Primitive::kScalarMul: return "scalar-mul";
    case Primitive::kTanh: return "tanh";
    case Primitive::kGelu: return "gelu";
    case Primitive::kSoftmax: return "softmax-last-axis";
    case Primitive::kLogSoftmax: return "log-softmax-last-axis";
    case Primitive::kGatherRows: return "gather-rows";
    case Primitive::kConcat: return "concat";
    case Primitive::kSlice: return "slice";
    case Primitive::kSliceRows: return "slice-rows";
    case Primitive::kSum: return "sum";
    case Primitive::kMean: return "mean";
    case Primitive::kPick: return "pick";
    case Primitive::kLayerNorm: return "layer-norm";
    case Primitive::kCausalAttention: return "causal-attention";
  }
  return "unknown";
}

Var Tape::push(Primitive kind, std::vector<std::size_t> inputs, Tensor value,
               BackwardFn backward) {
  check_finite(value, kind);
  Node n;
  n.kind = kind;
  n.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                [this](std::size_t i) { return nodes_[i].requires_grad; });
  n.inputs = std::move(inputs);
  n.value = std::move(value);
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id >= nodes_.size()) {
    throw ContractError("variable " + std::to_string(v.id) + " is not on this tape");
  }
  return nodes_[v.id];
}

std::vector<double>& Tape::grad_buffer(std::size_t id) {
  auto& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

std::vector<double> Tape::grad(Var v) const {
  const auto& n = node(v);
  if (n.grad.empty()) return std::vector<double>(n.value.size(), 0.0);
  return n.grad;
}

Primitive Tape::kind(Var v) const { return node(v).kind; }

std::span<const std::size_t> Tape::inputs(Var v) const { return node(v).inputs; }

Var Tape::constant(Tensor value) { return input(std::move(value), false); }

Var Tape::input(Tensor value, bool requires_grad) {
  check_finite(value, Primitive::kLeaf);
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::parameter(Parameter& p) {
  if (p.grad.size() != p.value.size()) p.zero_grad();
  Var v = input(p.value, true);
  nodes_[v.id].param = &p;
  return v;
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  require_rank2(A, "matmul");
  require_rank2(B, "matmul");
  const std::size_t n = A.shape[0], k = A.shape[1], m = B.shape[1];
  if (B.shape[0] != k) {
    throw DimensionError("matmul: " + to_string(A.shape) + " x " + to_string(B.shape));
  }
  Tensor out = Tensor::zeros({n, m});
  const double* pa = A.data.data();
  const double* pb = B.data.data();
  double* pc = out.data.data();
  for (std::size_t i = 0; i < n; ++i) {
    double* crow = pc + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      const double* brow = pb + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
  return push(Primitive::kMatmul, {a.id, b.id}, std::move(out),
              [n, k, m](Tape& t, const Node& self) {
                const std::size_t ia = self.inputs[0], ib = self.inputs[1];
                const double* dc = self.grad.data();
                if (t.needs_grad(ia)) {
                  auto& da = t.grad_buffer(ia);
                  const double* pb = t.nodes_[ib].value.data.data();
                  for (std::size_t i = 0; i < n; ++i) {
                    const double* dcrow = dc + i * m;
                    for (std::size_t p = 0; p < k; ++p) {
                      const double* brow = pb + p * m;
                      double acc = 0.0;
                      for (std::size_t j = 0; j < m; ++j) acc += dcrow[j] * brow[j];
                      da[i * k + p] += acc;
                    }
                  }
                }
                if (t.needs_grad(ib)) {
                  auto& db = t.grad_buffer(ib);
                  const double* pa = t.nodes_[ia].value.data.data();
                  for (std::size_t i = 0; i < n; ++i) {
                    const double* dcrow = dc + i * m;
                    for (std::size_t p = 0; p < k; ++p) {
                      const double av = pa[i * k + p];
                      double* dbrow = db.data() + p * m;
                      for (std::size_t j = 0; j < m; ++j) dbrow[j] += av * dcrow[j];
                    }
                  }
                }
              });
}

Var Tape::add(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  require_same_shape(A, B, "add");
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += B.data[i];
  return push(Primitive::kAdd, {a.id, b.id}, std::move(out), [](Tape& t, const Node& self) {
    for (std::size_t in : self.inputs) {
      if (!t.needs_grad(in)) continue;
      auto& g = t.grad_buffer(in);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Var Tape::add_bias(Var x, Var bias) {
  const Tensor& X = value(x);
  const Tensor& b = value(bias);
  require_rank2(X, "add_bias");
  const std::size_t n = X.shape[0], d = X.shape[1];
  if (b.rank() != 1 || b.shape[0] != d) {
    throw DimensionError("add_bias: " + to_string(X.shape) + " + " + to_string(b.shape));
  }
  Tensor out = X;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out.data[i * d + j] += b.data[j];
  return push(Primitive::kAddBias, {x.id, bias.id}, std::move(out),
              [n, d](Tape& t, const Node& self) {
                if (t.needs_grad(self.inputs[0])) {
                  auto& g = t.grad_buffer(self.inputs[0]);
                  for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                }
                if (t.needs_grad(self.inputs[1])) {
                  auto& g = t.grad_buffer(self.inputs[1]);
                  for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < d; ++j) g[j] += self.grad[i * d + j];
                }
              });
}

Var Tape::mul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  require_same_shape(A, B, "mul");
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= B.data[i];
  return push(Primitive::kMul, {a.id, b.id}, std::move(out), [](Tape& t, const Node& self) {
    const std::size_t ia = self.inputs[0], ib = self.inputs[1];
    if (t.needs_grad(ia)) {
      auto& g = t.grad_buffer(ia);
      const auto& other = t.nodes_[ib].value.data;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * other[i];
    }
    if (t.needs_grad(ib)) {
      auto& g = t.grad_buffer(ib);
      const auto& other = t.nodes_[ia].value.data;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * other[i];
    }
  });
}

Var Tape::scalar_mul(Var a, double s) {
  Tensor out = value(a);
  for (double& v : out.data) v *= s;
  return push(Primitive::kScalarMul, {a.id}, std::move(out), [s](Tape& t, const Node& self) {
    auto& g = t.grad_buffer(self.inputs[0]);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
  });
}

Var Tape::tanh(Var a) {
  Tensor out = value(a);
  for (double& v : out.data) v = std::tanh(v);
  return push(Primitive::kTanh, {a.id}, std::move(out), [](Tape& t, const Node& self) {
    auto& g = t.grad_buffer(self.inputs[0]);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double y = self.value.data[i];
      g[i] += self.grad[i] * (1.0 - y * y);
    }
  });
}

Var Tape::gelu(Var a) {
  Tensor out = value(a);
  for (double& v : out.data) {
    const double x = v;
    v = 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
  }
  return push(Primitive::kGelu, {a.id}, std::move(out), [](Tape& t, const Node& self) {
    const auto& x = t.nodes_[self.inputs[0]].value.data;
    auto& g = t.grad_buffer(self.inputs[0]);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double xi = x[i];
      const double th = std::tanh(kGeluC * (xi + kGeluA * xi * xi * xi));
      const double dinner = kGeluC * (1.0 + 3.0 * kGeluA * xi * xi);
      const double dy = 0.5 * (1.0 + th) + 0.5 * xi * (1.0 - th * th) * dinner;
      g[i] += self.grad[i] * dy;
    }
  });
}

Var Tape::softmax(Var a) {
  const Tensor& A = value(a);
  const auto [rows, cols] = last_axis_view(A, "softmax");
  Tensor out = A;
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = out.data.data() + r * cols;
    const double mx = *std::max_element(row, row + cols);
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      row[j] = std::exp(row[j] - mx);
      total += row[j];
    }
    for (std::size_t j = 0; j < cols; ++j) row[j] /= total;
  }
  return push(Primitive::kSoftmax, {a.id}, std::move(out),
              [rows, cols](Tape& t, const Node& self) {
                auto& g = t.grad_buffer(self.inputs[0]);
                for (std::size_t r = 0; r < rows; ++r) {
                  const double* y = self.value.data.data() + r * cols;
                  const double* dy = self.grad.data() + r * cols;
                  double dot = 0.0;
                  for (std::size_t j = 0; j < cols; ++j) dot += y[j] * dy[j];
                  for (std::size_t j = 0; j < cols; ++j) g[r * cols + j] += y[j] * (dy[j] - dot);
                }
              });
}

Var Tape::log_softmax(Var a) {
  const Tensor& A = value(a);
  const auto [rows, cols] = last_axis_view(A, "log_softmax");
  Tensor out = A;
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = out.data.data() + r * cols;
    const double mx = *std::max_element(row, row + cols);
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) total += std::exp(row[j] - mx);
    const double lse = mx + std::log(total);
    for (std::size_t j = 0; j < cols; ++j) row[j] -= lse;
  }
  return push(Primitive::kLogSoftmax, {a.id}, std::move(out),
              [rows, cols](Tape& t, const Node& self) {
                auto& g = t.grad_buffer(self.inputs[0]);
                for (std::size_t r = 0; r < rows; ++r) {
                  const double* y = self.value.data.data() + r * cols;
                  const double* dy = self.grad.data() + r * cols;
                  double total = 0.0;
                  for (std::size_t j = 0; j < cols; ++j) total += dy[j];
                  for (std::size_t j = 0; j < cols; ++j)
                    g[r * cols + j] += dy[j] - std::exp(y[j]) * total;
                }
              });
}

Var Tape::gather_rows(Var table, std::span<const int> rows) {
  const Tensor& T = value(table);
  require_rank2(T, "gather_rows");
  if (rows.empty()) throw DimensionError("gather_rows: no indices");
  const std::size_t vocab = T.shape[0], d = T.shape[1];
  std::vector<int> idx(rows.begin(), rows.end());
  Tensor out = Tensor::zeros({idx.size(), d});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || static_cast<std::size_t>(idx[i]) >= vocab) {
      throw DimensionError("gather_rows: index " + std::to_string(idx[i]) +
                           " outside table of " + std::to_string(vocab) + " rows");
    }
    std::copy_n(T.data.data() + static_cast<std::size_t>(idx[i]) * d, d,
                out.data.data() + i * d);
  }
  return push(Primitive::kGatherRows, {table.id}, std::move(out),
              [idx = std::move(idx), d](Tape& t, const Node& self) {
                auto& g = t.grad_buffer(self.inputs[0]);
                for (std::size_t i = 0; i < idx.size(); ++i) {
                  double* dst = g.data() + static_cast<std::size_t>(idx[i]) * d;
                  const double* src = self.grad.data() + i * d;
                  for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
                }
              });
}

Var Tape::concat(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const Tensor& first = value(parts[0]);
  const auto [rows, first_cols] = last_axis_view(first, "concat");
  std::vector<std::size_t> widths;
  std::vector<std::size_t> ids;
  std::size_t total = 0;
  for (Var p : parts) {
    const Tensor& t = value(p);
    if (t.rank() != first.rank()) throw DimensionError("concat: rank mismatch");
    const auto [r, c] = last_axis_view(t, "concat");
    if (r != rows) throw DimensionError("concat: leading dimension mismatch");
    widths.push_back(c);
    ids.push_back(p.id);
    total += c;
  }
  Shape shape = first.rank() == 1 ? Shape{total} : Shape{rows, total};
  Tensor out = Tensor::zeros(shape);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& t = value(parts[k]);
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(t.data.data() + r * widths[k], widths[k], out.data.data() + r * total + offset);
    offset += widths[k];
  }
  return push(Primitive::kConcat, std::move(ids), std::move(out),
              [rows, total, widths = std::move(widths)](Tape& t, const Node& self) {
                std::size_t off = 0;
                for (std::size_t k = 0; k < widths.size(); ++k) {
                  const std::size_t in = self.inputs[k];
                  if (t.needs_grad(in)) {
                    auto& g = t.grad_buffer(in);
                    for (std::size_t r = 0; r < rows; ++r)
                      for (std::size_t j = 0; j < widths[k]; ++j)
                        g[r * widths[k] + j] += self.grad[r * total + off + j];
                  }
                  off += widths[k];
                }
              });
}

Var Tape::slice(Var a, std::size_t begin, std::size_t end) {
  const Tensor& A = value(a);
  const auto [rows, cols] = last_axis_view(A, "slice");
  if (begin >= end || end > cols) {
    throw DimensionError("slice: [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") outside last axis of " + to_string(A.shape));
  }
  const std::size_t w = end - begin;
  Shape shape = A.rank() == 1 ? Shape{w} : Shape{rows, w};
  Tensor out = Tensor::zeros(shape);
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(A.data.data() + r * cols + begin, w, out.data.data() + r * w);
  return push(Primitive::kSlice, {a.id}, std::move(out),
              [rows, cols, begin, w](Tape& t, const Node& self) {
                auto& g = t.grad_buffer(self.inputs[0]);
                for (std::size_t r = 0; r < rows; ++r)
                  for (std::size_t j = 0; j < w; ++j)
                    g[r * cols + begin + j] += self.grad[r * w + j];
              });
}

Var Tape::slice_rows(Var a, std::size_t begin, std::size_t end) {
  const Tensor& A = value(a);
  require_rank2(A, "slice_rows");
  const std::size_t cols = A.shape[1];
  if (begin >= end || end > A.shape[0]) {
    throw DimensionError("slice_rows: [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") outside " + to_string(A.shape));
  }
  Tensor out({end - begin, cols},
             std::vector<double>(A.data.begin() + static_cast<std::ptrdiff_t>(begin * cols),
                                 A.data.begin() + static_cast<std::ptrdiff_t>(end * cols)));
  return push(Primitive::kSliceRows, {a.id}, std::move(out),
              [begin, cols](Tape& t, const Node& self) {
                auto& g = t.grad_buffer(self.inputs[0]);
                for (std::size_t i = 0; i < self.grad.size(); ++i)
                  g[begin * cols + i] += self.grad[i];
              });
}

Var Tape::sum(Var a) {
  const Tensor& A = value(a);
  double total = 0.0;
  for (double v : A.data) total += v;
  return push(Primitive::kSum, {a.id}, Tensor::scalar(total), [](Tape& t, const Node& self) {
    auto& g = t.grad_buffer(self.inputs[0]);
    for (double& v : g) v += self.grad[0];
  });
}

Var Tape::mean(Var a) {
  const Tensor& A = value(a);
  double total = 0.0;
  for (double v : A.data) total += v;
  const double inv = 1.0 / static_cast<double>(A.size());
  return push(Primitive::kMean, {a.id}, Tensor::scalar(total * inv),
              [inv](Tape& t, const Node& self) {
                auto& g = t.grad_buffer(self.inputs[0]);
                for (double& v : g) v += self.grad[0] * inv;
              });
}

Var Tape::pick(Var x, std::span<const int> cols) {
  const Tensor& X = value(x);
  require_rank2(X, "pick");
  const std::size_t n = X.shape[0], m = X.shape[1];
  if (cols.size() != n) {
    throw DimensionError("pick: " + std::to_string(cols.size()) + " indices for " +
                         std::to_string(n) + " rows");
  }
  std::vector<int> idx(cols.begin(), cols.end());
  Tensor out = Tensor::zeros({n});
  for (std::size_t i = 0; i < n; ++i) {
    if (idx[i] < 0 || static_cast<std::size_t>(idx[i]) >= m) {
      throw DimensionError("pick: column " + std::to_string(idx[i]) + " out of range");
    }
    out.data[i] = X.data[i * m + static_cast<std::size_t>(idx[i])];
  }
  return push(Primitive::kPick, {x.id}, std::move(out),
              [idx = std::move(idx), m](Tape& t, const Node& self) {
                auto& g = t.grad_buffer(self.inputs[0]);
                for (std::size_t i = 0; i < idx.size(); ++i)
                  g[i * m + static_cast<std::size_t>(idx[i])] += self.grad[i];
              });
}

Var Tape::layer_norm(Var x, Var gain, Var bias, double eps) {
  const Tensor& X = value(x);
  const Tensor& G = value(gain);
  const Tensor& B = value(bias);
  require_rank2(X, "layer_norm");
  const std::size_t n = X.shape[0], d = X.shape[1];
  if (G.shape != Shape{d} || B.shape != Shape{d}) {
    throw DimensionError("layer_norm: gain/bias must have shape [" + std::to_string(d) + "]");
  }
  auto xhat = std::make_shared<std::vector<double>>(n * d);
  auto rstd = std::make_shared<std::vector<double>>(n);
  Tensor out = Tensor::zeros({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = X.data.data() + i * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    const double rs = 1.0 / std::sqrt(var + eps);
    (*rstd)[i] = rs;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (row[j] - mu) * rs;
      (*xhat)[i * d + j] = h;
      out.data[i * d + j] = G.data[j] * h + B.data[j];
    }
  }
  return push(Primitive::kLayerNorm, {x.id, gain.id, bias.id}, std::move(out),
              [n, d, xhat, rstd](Tape& t, const Node& self) {
                const std::size_t ix = self.inputs[0], ig = self.inputs[1], ib = self.inputs[2];
                const auto& gv = t.nodes_[ig].value.data;
                if (t.needs_grad(ig)) {
                  auto& g = t.grad_buffer(ig);
                  for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < d; ++j)
                      g[j] += self.grad[i * d + j] * (*xhat)[i * d + j];
                }
                if (t.needs_grad(ib)) {
                  auto& g = t.grad_buffer(ib);
                  for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < d; ++j) g[j] += self.grad[i * d + j];
                }
                if (t.needs_grad(ix)) {
                  auto& g = t.grad_buffer(ix);
                  const double inv_d = 1.0 / static_cast<double>(d);
                  for (std::size_t i = 0; i < n; ++i) {
                    double mean_dh = 0.0, mean_dh_h = 0.0;
                    for (std::size_t j = 0; j < d; ++j) {
                      const double dh = self.grad[i * d + j] * gv[j];
                      mean_dh += dh;
                      mean_dh_h += dh * (*xhat)[i * d + j];
                    }
                    mean_dh *= inv_d;
                    mean_dh_h *= inv_d;
                    for (std::size_t j = 0; j < d; ++j) {
                      const double dh = self.grad[i * d + j] * gv[j];
                      g[i * d + j] +=
                          (*rstd)[i] * (dh - mean_dh - (*xhat)[i * d + j] * mean_dh_h);
                    }
                  }
                }
              });
}

Var Tape::causal_attention(Var qkv, std::size_t heads) {
  const Tensor& X = value(qkv);
  require_rank2(X, "causal_attention");
  const std::size_t T = X.shape[0], width = X.shape[1];
  if (heads == 0 || width % (3 * heads) != 0) {
    throw DimensionError("causal_attention: width " + std::to_string(width) +
                         " not divisible into 3 x " + std::to_string(heads) + " heads");
  }
  const std::size_t d = width / 3, hd = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  // probs[h][i*T + j] for j <= i
  auto probs = std::make_shared<std::vector<double>>(heads * T * T, 0.0);
  Tensor out = Tensor::zeros({T, d});
  const double* x = X.data.data();
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t qo = h * hd, ko = d + h * hd, vo = 2 * d + h * hd;
    double* P = probs->data() + h * T * T;
    for (std::size_t i = 0; i < T; ++i) {
      const double* q = x + i * width + qo;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j <= i; ++j) {
        const double* k = x + j * width + ko;
        double s = 0.0;
        for (std::size_t c = 0; c < hd; ++c) s += q[c] * k[c];
        s *= scale;
        P[i * T + j] = s;
        mx = std::max(mx, s);
      }
      double total = 0.0;
      for (std::size_t j = 0; j <= i; ++j) {
        P[i * T + j] = std::exp(P[i * T + j] - mx);
        total += P[i * T + j];
      }
      double* o = out.data.data() + i * d + h * hd;
      for (std::size_t j = 0; j <= i; ++j) {
        P[i * T + j] /= total;
        const double p = P[i * T + j];
        const double* v = x + j * width + vo;
        for (std::size_t c = 0; c < hd; ++c) o[c] += p * v[c];
      }
    }
  }
  return push(
      Primitive::kCausalAttention, {qkv.id}, std::move(out),
      [T, width, d, hd, heads, scale, probs](Tape& t, const Node& self) {
        const double* x = t.nodes_[self.inputs[0]].value.data.data();
        auto& g = t.grad_buffer(self.inputs[0]);
        std::vector<double> dP(T);
        for (std::size_t h = 0; h < heads; ++h) {
          const std::size_t qo = h * hd, ko = d + h * hd, vo = 2 * d + h * hd;
          const double* P = probs->data() + h * T * T;
          for (std::size_t i = 0; i < T; ++i) {
            const double* dout = self.grad.data() + i * d + h * hd;
            double dot = 0.0;
            for (std::size_t j = 0; j <= i; ++j) {
              const double* v = x + j * width + vo;
              double acc = 0.0;
              for (std::size_t c = 0; c < hd; ++c) acc += dout[c] * v[c];
              dP[j] = acc;
              dot += P[i * T + j] * acc;
              double* dv = g.data() + j * width + vo;
              const double p = P[i * T + j];
              for (std::size_t c = 0; c < hd; ++c) dv[c] += p * dout[c];
            }
            const double* q = x + i * width + qo;
            double* dq = g.data() + i * width + qo;
            for (std::size_t j = 0; j <= i; ++j) {
              const double ds = P[i * T + j] * (dP[j] - dot) * scale;
              const double* k = x + j * width + ko;
              double* dk = g.data() + j * width + ko;
              for (std::size_t c = 0; c < hd; ++c) {
                dq[c] += ds * k[c];
                dk[c] += ds * q[c];
              }
            }
          }
        }
      });
}

void Tape::backward(Var root) {
  const Node& r = node(root);
  if (r.value.shape != Shape{1}) {
    throw ContractError("backward: root must have shape [1], got " + to_string(r.value.shape));
  }
  for (auto& n : nodes_) n.grad.clear();
  if (!r.requires_grad) return;
  grad_buffer(root.id)[0] = 1.0;
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.param != nullptr) {
      auto& pg = n.param->grad;
      for (std::size_t j = 0; j < pg.size(); ++j) pg[j] += n.grad[j];
    }
    if (n.backward) n.backward(*this, n);
  }
}

}  // namespace rlsr::ad
