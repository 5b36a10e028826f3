// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace rlsr::embed {

enum class TfMode { kRaw, kSublinear };

struct EncoderConfig {
  std::vector<int> orders = {1, 2, 3};
  std::size_t dim = 256;
  std::uint64_t hash_seed = 0;
  TfMode tf = TfMode::kSublinear;
  // Bytes kept from the start of the text; 0 keeps everything.
  std::size_t truncate = 2048;

  // Throws ContractError when dim < 8 or an order is below 1.
  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

struct EmbeddingVector {
  std::vector<double> values;
  // Set only for empty input; values are then all zero.
  bool empty = false;
};

/// Text encoder interface so a different embedding backend can stand in for
/// the hashed n-gram encoder.
class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual EmbeddingVector encode(std::string_view text) const = 0;
};

// FNV-1a over the window bytes.
std::uint64_t fnv1a(std::string_view bytes);

// Bucket weights before normalisation: each n-byte window of the truncated
// text increments bucket (fnv1a(window) ^ hash_seed) % dim; the tf mode is then
// applied per bucket.
std::vector<double> feature_weights(std::string_view text, const EncoderConfig& cfg);

// L2-normalises weights; an all-zero input yields the flagged zero vector.
EmbeddingVector normalize(std::vector<double> weights);

EmbeddingVector embed(std::string_view text, const EncoderConfig& cfg);

// Cosine similarity clamped to [-1, 1]. Either side empty gives 0.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

class HashedNgramEncoder final : public TextEncoder {
 public:
  explicit HashedNgramEncoder(EncoderConfig cfg);
  EmbeddingVector encode(std::string_view text) const override;
  const EncoderConfig& config() const { return cfg_; }

 private:
  EncoderConfig cfg_;
};

}  // namespace rlsr::embed
