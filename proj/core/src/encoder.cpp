// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#include "rlsr/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rlsr/errors.hpp"

namespace rlsr::embed {

void EncoderConfig::validate() const {
  if (dim < 8) throw ContractError("encoder dimension must be at least 8");
  if (orders.empty()) throw ContractError("encoder needs at least one n-gram order");
  for (int n : orders) {
    if (n < 1) throw ContractError("n-gram order must be >= 1, got " + std::to_string(n));
  }
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<double> feature_weights(std::string_view text, const EncoderConfig& cfg) {
  cfg.validate();
  if (cfg.truncate > 0 && text.size() > cfg.truncate) text = text.substr(0, cfg.truncate);
  std::vector<double> counts(cfg.dim, 0.0);
  for (int order : cfg.orders) {
    const auto n = static_cast<std::size_t>(order);
    for (std::size_t i = 0; i + n <= text.size(); ++i) {
      const auto bucket = (fnv1a(text.substr(i, n)) ^ cfg.hash_seed) % cfg.dim;
      counts[bucket] += 1.0;
    }
  }
  if (cfg.tf == TfMode::kSublinear) {
    for (double& c : counts) {
      if (c > 0.0) c = 1.0 + std::log(c);
    }
  }
  return counts;
}

EmbeddingVector normalize(std::vector<double> weights) {
  double sq = 0.0;
  for (double w : weights) sq += w * w;
  EmbeddingVector v;
  if (sq == 0.0) {
    v.values = std::move(weights);
    v.empty = true;
    return v;
  }
  const double inv = 1.0 / std::sqrt(sq);
  for (double& w : weights) w *= inv;
  v.values = std::move(weights);
  return v;
}

EmbeddingVector embed(std::string_view text, const EncoderConfig& cfg) {
  return normalize(feature_weights(text, cfg));
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.empty || b.empty) return 0.0;
  if (a.values.size() != b.values.size()) {
    throw DimensionError("cosine: dimension " + std::to_string(a.values.size()) + " vs " +
                         std::to_string(b.values.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

HashedNgramEncoder::HashedNgramEncoder(EncoderConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
}

EmbeddingVector HashedNgramEncoder::encode(std::string_view text) const {
  return embed(text, cfg_);
}

}  // namespace rlsr::embed
