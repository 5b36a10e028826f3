// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#include "rlsr/vocab.hpp"

#include "rlsr/errors.hpp"

namespace rlsr::data {

TokenIds encode(std::string_view text, const EncodeOptions& opts) {
  const std::size_t specials = (opts.add_bos ? 1 : 0) + (opts.add_eos ? 1 : 0);
  std::size_t payload = text.size();
  if (opts.max_tokens > 0 && payload + specials > opts.max_tokens) {
    if (opts.overflow == Overflow::kReject || opts.max_tokens < specials) {
      throw TruncationError("encode: " + std::to_string(payload + specials) +
                            " tokens exceed limit " + std::to_string(opts.max_tokens));
    }
    payload = opts.max_tokens - specials;
  }
  TokenIds ids;
  ids.reserve(payload + specials);
  if (opts.add_bos) ids.push_back(kBos);
  for (std::size_t i = 0; i < payload; ++i) ids.push_back(static_cast<unsigned char>(text[i]));
  if (opts.add_eos) ids.push_back(kEos);
  return ids;
}

std::string decode(std::span<const int> ids) {
  std::string out;
  out.reserve(ids.size());
  for (int id : ids) {
    if (id >= 0 && id < 256) {
      out.push_back(static_cast<char>(static_cast<unsigned char>(id)));
    } else if (!is_special(id)) {
      throw DimensionError("decode: token id " + std::to_string(id) + " outside vocabulary");
    }
  }
  return out;
}

TokenIds prompt_ids(std::string_view prompt) {
  TokenIds ids = encode(prompt, {.add_bos = true});
  ids.push_back(kSep);
  return ids;
}

TokenIds response_ids(std::string_view response) {
  return encode(response, {.add_eos = true});
}

}  // namespace rlsr::data
