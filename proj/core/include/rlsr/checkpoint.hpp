// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rlsr/adamw.hpp"
#include "rlsr/policy.hpp"

namespace rlsr::ckpt {

inline constexpr int kFormatVersion = 1;

enum class Dtype { kF64, kF32 };

struct Manifest {
  int format_version = kFormatVersion;
  policy::PolicyConfig policy;
  std::int64_t step = 0;
  // Seeds of every stage that produced these weights, oldest first.
  std::vector<std::uint64_t> seed_lineage;
  std::string mode;
  // Flat JSON object of the training configuration, stored verbatim.
  std::string train_config_json = "{}";
  Dtype dtype = Dtype::kF64;
};

struct Checkpoint {
  policy::Policy policy;
  std::optional<ad::OptimizerState> optimizer;
  Manifest manifest;
};

// Writes <dir>/manifest.json and <dir>/params.bin. params.bin is an 8-byte
// little-endian header length, a JSON index of {name, dtype, shape, offset},
// then the little-endian IEEE-754 arrays. f32 storage is lossy.
// The directory is written under a temporary name and renamed into place.
void save(const std::filesystem::path& dir, const policy::Policy& policy,
          const ad::OptimizerState* optimizer, const Manifest& manifest);

// Throws IoError on missing or malformed files.
Checkpoint load(const std::filesystem::path& dir);

}  // namespace rlsr::ckpt
