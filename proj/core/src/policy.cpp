// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#include "rlsr/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "rlsr/errors.hpp"
#include "rlsr/rng.hpp"

namespace rlsr::policy {
namespace {

// Fixed parameter order; per-layer entries repeat for every layer.
enum GlobalSlot : std::size_t { kTokEmb = 0, kPosEmb, kGlobalCount };
enum LayerSlot : std::size_t {
  kLn1G = 0,
  kLn1B,
  kWqkv,
  kBqkv,
  kWo,
  kBo,
  kLn2G,
  kLn2B,
  kWfc1,
  kBfc1,
  kWfc2,
  kBfc2,
  kLayerCount
};
enum HeadSlot : std::size_t { kLnfG = 0, kLnfB, kWout, kBout, kHeadCount };

std::size_t layer_index(std::size_t layer, LayerSlot slot) {
  return kGlobalCount + layer * kLayerCount + slot;
}

std::size_t head_index(const PolicyConfig& cfg, HeadSlot slot) {
  return kGlobalCount + cfg.layers * kLayerCount + slot;
}

struct Spec {
  std::string name;
  ad::Shape shape;
  enum class Init { kNormal, kResidual, kOnes, kZeros, kHead } init;
};

std::vector<Spec> layout(const PolicyConfig& c) {
  const std::size_t d = c.d_model, f = c.ffn_mult * c.d_model;
  std::vector<Spec> specs;
  specs.push_back({"tok_emb", {c.vocab, d}, Spec::Init::kNormal});
  specs.push_back({"pos_emb", {c.context, d}, Spec::Init::kNormal});
  for (std::size_t l = 0; l < c.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    specs.push_back({p + "ln1.gain", {d}, Spec::Init::kOnes});
    specs.push_back({p + "ln1.bias", {d}, Spec::Init::kZeros});
    specs.push_back({p + "attn.w_qkv", {d, 3 * d}, Spec::Init::kNormal});
    specs.push_back({p + "attn.b_qkv", {3 * d}, Spec::Init::kZeros});
    specs.push_back({p + "attn.w_out", {d, d}, Spec::Init::kResidual});
    specs.push_back({p + "attn.b_out", {d}, Spec::Init::kZeros});
    specs.push_back({p + "ln2.gain", {d}, Spec::Init::kOnes});
    specs.push_back({p + "ln2.bias", {d}, Spec::Init::kZeros});
    specs.push_back({p + "mlp.w_fc1", {d, f}, Spec::Init::kNormal});
    specs.push_back({p + "mlp.b_fc1", {f}, Spec::Init::kZeros});
    specs.push_back({p + "mlp.w_fc2", {f, d}, Spec::Init::kResidual});
    specs.push_back({p + "mlp.b_fc2", {d}, Spec::Init::kZeros});
  }
  specs.push_back({"lnf.gain", {d}, Spec::Init::kOnes});
  specs.push_back({"lnf.bias", {d}, Spec::Init::kZeros});
  specs.push_back({"head.w", {d, c.vocab}, Spec::Init::kHead});
  specs.push_back({"head.b", {c.vocab}, Spec::Init::kZeros});
  return specs;
}

void check_length(const PolicyConfig& cfg, std::size_t len) {
  if (len == 0) throw ContractError("policy input must contain at least one token");
  if (len > cfg.context) {
    throw ContractError("sequence of " + std::to_string(len) + " tokens exceeds context " +
                        std::to_string(cfg.context));
  }
}

void check_tokens(const PolicyConfig& cfg, std::span<const int> tokens) {
  for (int t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= cfg.vocab) {
      throw ContractError("token id " + std::to_string(t) + " outside vocabulary");
    }
  }
}

// Shared forward body. `bind` maps a parameter index to a tape variable.
// `first_row` drops hidden rows before the output projection.
template <class Bind>
ad::Var build_forward(ad::Tape& tape, const PolicyConfig& cfg, std::span<const int> tokens,
                      std::size_t first_row, Bind&& bind) {
  check_length(cfg, tokens.size());
  check_tokens(cfg, tokens);
  std::vector<int> positions(tokens.size());
  std::iota(positions.begin(), positions.end(), 0);
  ad::Var x = tape.add(tape.gather_rows(bind(kTokEmb), tokens),
                       tape.gather_rows(bind(kPosEmb), positions));
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    auto P = [&](LayerSlot s) { return bind(layer_index(l, s)); };
    ad::Var h = tape.layer_norm(x, P(kLn1G), P(kLn1B));
    ad::Var qkv = tape.add_bias(tape.matmul(h, P(kWqkv)), P(kBqkv));
    ad::Var att = tape.causal_attention(qkv, cfg.heads);
    x = tape.add(x, tape.add_bias(tape.matmul(att, P(kWo)), P(kBo)));
    h = tape.layer_norm(x, P(kLn2G), P(kLn2B));
    ad::Var f = tape.gelu(tape.add_bias(tape.matmul(h, P(kWfc1)), P(kBfc1)));
    x = tape.add(x, tape.add_bias(tape.matmul(f, P(kWfc2)), P(kBfc2)));
  }
  if (first_row > 0) x = tape.slice_rows(x, first_row, tokens.size());
  x = tape.layer_norm(x, bind(head_index(cfg, kLnfG)), bind(head_index(cfg, kLnfB)));
  return tape.add_bias(tape.matmul(x, bind(head_index(cfg, kWout))),
                       bind(head_index(cfg, kBout)));
}

template <class Bind>
ResponseLogProbs build_response_log_probs(ad::Tape& tape, const PolicyConfig& cfg,
                                          std::span<const int> prompt,
                                          std::span<const int> response, Bind&& bind) {
  if (prompt.empty()) throw ContractError("prompt must contain at least one token");
  if (response.empty()) throw ContractError("response must contain at least one token");
  check_length(cfg, prompt.size() + response.size());
  // The final response token is never an input.
  std::vector<int> tokens(prompt.begin(), prompt.end());
  tokens.insert(tokens.end(), response.begin(), response.end() - 1);
  ad::Var logits = build_forward(tape, cfg, tokens, prompt.size() - 1, bind);
  ad::Var logp = tape.log_softmax(logits);
  return {tape.pick(logp, response), logp};
}

// Incremental decoder with a key/value cache, used only for sampling.
class Decoder {
 public:
  explicit Decoder(const Policy& p)
      : cfg_(p.config()), params_(p.parameters()), d_(cfg_.d_model),
        kcache_(cfg_.layers), vcache_(cfg_.layers) {}

  // Appends one token and returns next-token logits.
  std::vector<double> step(int token) {
    const std::size_t pos = len_;
    if (pos >= cfg_.context) throw ContractError("decoder exceeded context length");
    const std::size_t d = d_, f = cfg_.ffn_mult * d, hd = d / cfg_.heads;
    const auto& tok = value(kTokEmb);
    const auto& pe = value(kPosEmb);
    std::vector<double> x(d), h(d), qkv(3 * d), att(d), tmp(d), ff(f);
    for (std::size_t j = 0; j < d; ++j)
      x[j] = tok[static_cast<std::size_t>(token) * d + j] + pe[pos * d + j];
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    for (std::size_t l = 0; l < cfg_.layers; ++l) {
      auto P = [&](LayerSlot s) -> const std::vector<double>& {
        return value(layer_index(l, s));
      };
      layer_norm(x, P(kLn1G), P(kLn1B), h);
      affine(h, P(kWqkv), P(kBqkv), 3 * d, qkv);
      auto& kc = kcache_[l];
      auto& vc = vcache_[l];
      kc.insert(kc.end(), qkv.begin() + static_cast<std::ptrdiff_t>(d),
                qkv.begin() + static_cast<std::ptrdiff_t>(2 * d));
      vc.insert(vc.end(), qkv.begin() + static_cast<std::ptrdiff_t>(2 * d), qkv.end());
      std::fill(att.begin(), att.end(), 0.0);
      std::vector<double> s(pos + 1);
      for (std::size_t hh = 0; hh < cfg_.heads; ++hh) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j <= pos; ++j) {
          double acc = 0.0;
          for (std::size_t c = 0; c < hd; ++c) acc += qkv[hh * hd + c] * kc[j * d + hh * hd + c];
          s[j] = acc * scale;
          mx = std::max(mx, s[j]);
        }
        double total = 0.0;
        for (std::size_t j = 0; j <= pos; ++j) {
          s[j] = std::exp(s[j] - mx);
          total += s[j];
        }
        for (std::size_t j = 0; j <= pos; ++j) {
          const double p = s[j] / total;
          for (std::size_t c = 0; c < hd; ++c) att[hh * hd + c] += p * vc[j * d + hh * hd + c];
        }
      }
      affine(att, P(kWo), P(kBo), d, tmp);
      for (std::size_t j = 0; j < d; ++j) x[j] += tmp[j];
      layer_norm(x, P(kLn2G), P(kLn2B), h);
      affine(h, P(kWfc1), P(kBfc1), f, ff);
      for (double& v : ff) v = 0.5 * v * (1.0 + std::tanh(0.7978845608028654 * (v + 0.044715 * v * v * v)));
      affine(ff, P(kWfc2), P(kBfc2), d, tmp);
      for (std::size_t j = 0; j < d; ++j) x[j] += tmp[j];
    }
    layer_norm(x, value(head_index(cfg_, kLnfG)), value(head_index(cfg_, kLnfB)), h);
    std::vector<double> logits(cfg_.vocab);
    affine(h, value(head_index(cfg_, kWout)), value(head_index(cfg_, kBout)), cfg_.vocab, logits);
    ++len_;
    return logits;
  }

  std::size_t length() const { return len_; }

 private:
  const std::vector<double>& value(std::size_t idx) const { return params_[idx].value.data; }

  static void layer_norm(const std::vector<double>& x, const std::vector<double>& g,
                         const std::vector<double>& b, std::vector<double>& out) {
    const std::size_t d = x.size();
    double mu = 0.0;
    for (double v : x) mu += v;
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (double v : x) var += (v - mu) * (v - mu);
    var /= static_cast<double>(d);
    const double rs = 1.0 / std::sqrt(var + 1e-5);
    for (std::size_t j = 0; j < d; ++j) out[j] = g[j] * ((x[j] - mu) * rs) + b[j];
  }

  // out[m] = in[k] * W[k, m] + b[m]
  static void affine(const std::vector<double>& in, const std::vector<double>& w,
                     const std::vector<double>& b, std::size_t m, std::vector<double>& out) {
    std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(m), 0.0);
    for (std::size_t p = 0; p < in.size(); ++p) {
      const double a = in[p];
      const double* row = w.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) out[j] += a * row[j];
    }
    for (std::size_t j = 0; j < m; ++j) out[j] += b[j];
  }

  const PolicyConfig& cfg_;
  const std::vector<ad::Parameter>& params_;
  std::size_t d_;
  std::size_t len_ = 0;
  std::vector<std::vector<double>> kcache_;
  std::vector<std::vector<double>> vcache_;
};

int argmax(const std::vector<double>& v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

int draw(const std::vector<double>& logits, double temperature, double u) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> w(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    w[i] = std::exp((logits[i] - mx) / temperature);
    total += w[i];
  }
  double target = u * total;
  for (std::size_t i = 0; i < w.size(); ++i) {
    target -= w[i];
    if (target < 0.0) return static_cast<int>(i);
  }
  // Rounding can leave a sliver past the last bucket.
  for (std::size_t i = w.size(); i-- > 0;) {
    if (w[i] > 0.0) return static_cast<int>(i);
  }
  return 0;
}

}  // namespace

void PolicyConfig::validate() const {
  if (d_model == 0 || layers == 0 || heads == 0 || ffn_mult == 0 || context == 0) {
    throw ContractError("policy dimensions must be positive");
  }
  if (d_model % heads != 0) throw ContractError("d_model must be divisible by heads");
  if (vocab != static_cast<std::size_t>(data::kVocabSize)) {
    throw ContractError("policy vocabulary must match the byte vocabulary");
  }
}

Policy::Policy(PolicyConfig cfg, const InitOptions& init) : cfg_(cfg) {
  cfg_.validate();
  build_layout(&init);
}

Policy::Policy(PolicyConfig cfg, std::vector<ad::Parameter> params)
    : cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
  const auto specs = layout(cfg_);
  if (specs.size() != params_.size()) {
    throw DimensionError("expected " + std::to_string(specs.size()) + " parameters, got " +
                         std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (params_[i].name != specs[i].name || params_[i].value.shape != specs[i].shape) {
      throw DimensionError("parameter " + std::to_string(i) + " (" + params_[i].name +
                           ") does not match expected " + specs[i].name +
                           ad::to_string(specs[i].shape));
    }
    params_[i].zero_grad();
  }
}

void Policy::build_layout(const InitOptions* init) {
  const auto specs = layout(cfg_);
  const double resid_std = init->stddev / std::sqrt(2.0 * static_cast<double>(cfg_.layers));
  params_.clear();
  params_.reserve(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    ad::Tensor t = ad::Tensor::zeros(s.shape);
    CounterRng rng(init->seed, i);
    switch (s.init) {
      case Spec::Init::kNormal:
        for (double& v : t.data) v = init->stddev * rng.normal();
        break;
      case Spec::Init::kResidual:
        for (double& v : t.data) v = resid_std * rng.normal();
        break;
      case Spec::Init::kOnes:
        std::fill(t.data.begin(), t.data.end(), 1.0);
        break;
      case Spec::Init::kZeros:
        break;
      case Spec::Init::kHead:
        if (!init->zero_output_head) {
          for (double& v : t.data) v = init->stddev * rng.normal();
        }
        break;
    }
    params_.emplace_back(s.name, std::move(t));
  }
}

std::vector<ad::Parameter*> Policy::parameter_ptrs() {
  std::vector<ad::Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(&p);
  return out;
}

std::size_t Policy::num_parameters() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void Policy::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

ad::Var Policy::forward(ad::Tape& tape, std::span<const int> tokens) {
  return build_forward(tape, cfg_, tokens, 0,
                       [&](std::size_t i) { return tape.parameter(params_[i]); });
}

ad::Tensor Policy::forward_logits(std::span<const int> tokens) const {
  ad::Tape tape;
  const ad::Var out = build_forward(tape, cfg_, tokens, 0, [&](std::size_t i) {
    return tape.constant(params_[i].value);
  });
  return tape.value(out);
}

ResponseLogProbs Policy::response_log_probs(ad::Tape& tape, std::span<const int> prompt,
                                            std::span<const int> response) {
  return build_response_log_probs(tape, cfg_, prompt, response,
                                  [&](std::size_t i) { return tape.parameter(params_[i]); });
}

ResponseLogProbs Policy::response_log_probs(ad::Tape& tape, std::span<const int> prompt,
                                            std::span<const int> response) const {
  return build_response_log_probs(tape, cfg_, prompt, response, [&](std::size_t i) {
    return tape.constant(params_[i].value);
  });
}

LogProbs Policy::sequence_log_prob(std::span<const int> prompt,
                                   std::span<const int> response) const {
  ad::Tape tape;
  const auto r = response_log_probs(tape, prompt, response);
  LogProbs out;
  out.per_token = tape.value(r.token_log_probs).data;
  for (double v : out.per_token) out.total += v;
  return out;
}

std::vector<SampledResponse> Policy::sample(std::span<const int> prompt,
                                            const SamplingOptions& opts) const {
  if (!opts.greedy && !(opts.temperature > 0.0)) {
    throw ContractError("sampling temperature must be positive");
  }
  if (opts.count == 0) throw ContractError("sample count must be at least 1");
  check_length(cfg_, prompt.size());
  check_tokens(cfg_, prompt);
  // Prefill once; every sample continues from a copy of the cache.
  Decoder prefix(*this);
  std::vector<double> first_logits;
  for (int t : prompt) first_logits = prefix.step(t);
  const std::size_t room = cfg_.context - prompt.size();
  const std::size_t limit = std::min(opts.max_new_tokens, room);

  std::vector<SampledResponse> out(opts.count);
  for (std::size_t g = 0; g < opts.count; ++g) {
    Decoder dec = prefix;
    auto logits = first_logits;
    CounterRng rng(opts.seed, g);
    auto& r = out[g];
    for (std::size_t step = 0; step < limit; ++step) {
      const double u = static_cast<double>(rng.at(step) >> 11) * 0x1.0p-53;
      const int tok = opts.greedy ? argmax(logits) : draw(logits, opts.temperature, u);
      r.ids.push_back(tok);
      if (tok == data::kEos) break;
      if (step + 1 < limit) logits = dec.step(tok);
    }
    r.truncated = r.ids.empty() || r.ids.back() != data::kEos;
  }
  return out;
}

PolicySnapshot Policy::snapshot_reference() const { return PolicySnapshot(*this); }

bool Policy::operator==(const Policy& other) const {
  if (!(cfg_ == other.cfg_) || params_.size() != other.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name != other.params_[i].name || !(params_[i].value == other.params_[i].value)) {
      return false;
    }
  }
  return true;
}

PolicySnapshot::PolicySnapshot(Policy policy)
    : policy_(std::make_shared<const Policy>(std::move(policy))) {}

double exact_token_kl(const Policy& live, const Policy& reference, std::span<const int> prompt,
                      std::span<const int> response) {
  ad::Tape t1, t2;
  const auto a = live.response_log_probs(t1, prompt, response);
  const auto b = reference.response_log_probs(t2, prompt, response);
  const auto& la = t1.value(a.log_softmax);
  const auto& lb = t2.value(b.log_softmax);
  const std::size_t rows = la.shape[0], cols = la.shape[1];
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const double lp = la.data[i * cols + j];
      total += std::exp(lp) * (lp - lb.data[i * cols + j]);
    }
  }
  return total / static_cast<double>(rows);
}

}  // namespace rlsr::policy
