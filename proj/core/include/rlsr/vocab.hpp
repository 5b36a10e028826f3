// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rlsr::data {

// Byte tokens occupy ids 0..255; specials follow.
inline constexpr int kBos = 256;
inline constexpr int kEos = 257;
inline constexpr int kPad = 258;
inline constexpr int kSep = 259;
inline constexpr int kVocabSize = 260;

using TokenIds = std::vector<int>;

constexpr bool is_special(int id) { return id >= kBos && id < kVocabSize; }

class TruncationError : public std::length_error {
 public:
  using std::length_error::length_error;
};

enum class Overflow { kReject, kTruncate };

struct EncodeOptions {
  bool add_bos = false;
  bool add_eos = false;
  // Upper bound on the encoded length including specials; 0 means none.
  std::size_t max_tokens = 0;
  Overflow overflow = Overflow::kReject;
};

TokenIds encode(std::string_view text, const EncodeOptions& opts = {});

// Specials are dropped; every other id must be a byte.
std::string decode(std::span<const int> ids);

// Policy input for a prompt: BOS, the prompt bytes, then SEP.
TokenIds prompt_ids(std::string_view prompt);
// Training target for a response: the bytes followed by EOS.
TokenIds response_ids(std::string_view response);

}  // namespace rlsr::data
