// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#include "json_bytes.hpp"

#include <stdexcept>

#include <boost/beast/core/detail/base64.hpp>

namespace rlsr::detail {

namespace b64 = boost::beast::detail::base64;

bool is_valid_utf8(std::string_view s) {
  // The serializer rejects ill-formed UTF-8 in strict mode.
  try {
    (void)nlohmann::json(std::string(s)).dump();
    return true;
  } catch (const nlohmann::json::type_error&) {
    return false;
  }
}

std::string base64_encode(std::string_view bytes) {
  std::string out(b64::encoded_size(bytes.size()), '\0');
  out.resize(b64::encode(out.data(), bytes.data(), bytes.size()));
  return out;
}

std::string base64_decode(std::string_view text) {
  std::string out(b64::decoded_size(text.size()), '\0');
  const auto [written, read] = b64::decode(out.data(), text.data(), text.size());
  // The decoder stops at the first padding character.
  std::size_t pad = 0;
  while (pad < 2 && pad < text.size() && text[text.size() - 1 - pad] == '=') ++pad;
  if (text.size() % 4 != 0 || read + pad < text.size()) throw std::invalid_argument("malformed base64");
  out.resize(written);
  return out;
}

void put_bytes(nlohmann::json& obj, const std::string& key, std::string_view bytes) {
  if (is_valid_utf8(bytes)) {
    obj[key] = std::string(bytes);
  } else {
    obj[key + "_b64"] = base64_encode(bytes);
  }
}

std::optional<std::string> get_bytes(const nlohmann::json& obj, const std::string& key) {
  if (auto it = obj.find(key); it != obj.end() && it->is_string()) {
    return it->get<std::string>();
  }
  if (auto it = obj.find(key + "_b64"); it != obj.end() && it->is_string()) {
    return base64_decode(it->get_ref<const std::string&>());
  }
  return std::nullopt;
}

}  // namespace rlsr::detail
