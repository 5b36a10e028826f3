// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Byte-string fields in JSON documents: valid UTF-8 is stored as a plain
// string under `key`, anything else base64-encoded under `key_b64`.

#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

namespace rlsr::detail {

bool is_valid_utf8(std::string_view s);
std::string base64_encode(std::string_view bytes);
// Throws std::invalid_argument on malformed input.
std::string base64_decode(std::string_view text);

void put_bytes(nlohmann::json& obj, const std::string& key, std::string_view bytes);
// Empty optional when neither `key` nor `key_b64` holds a string.
std::optional<std::string> get_bytes(const nlohmann::json& obj, const std::string& key);

}  // namespace rlsr::detail
