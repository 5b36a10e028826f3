// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace rlsr::data {

struct Sample {
  std::string prompt;
  std::string response;

  bool operator==(const Sample&) const = default;
};

struct Dataset {
  std::vector<Sample> samples;
  // File path or generator description.
  std::string provenance;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  bool operator==(const Dataset&) const = default;
};

struct LoadResult {
  Dataset dataset;
  std::size_t skipped = 0;
};

// One JSON object per line with string fields "prompt" and "response"
// (or their "_b64" variants). Lines that do not parse, lack a field, or have
// an empty field are counted in `skipped`. Throws IoError if unreadable.
LoadResult load_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const Dataset& dataset);

enum class TaskKind { kCopy, kUpper, kKeywords };

std::string_view task_tag(TaskKind kind);
// Throws UsageError for unknown names.
TaskKind parse_task_kind(std::string_view name);

struct GeneratorSpec {
  TaskKind kind = TaskKind::kCopy;
  std::size_t n = 1;
  std::uint64_t seed = 0;
  // copy/upper: payload length in bytes. keywords: number of marked words.
  std::size_t min_len = 4;
  std::size_t max_len = 8;
};

// Prompts read "<tag>: <payload>". copy echoes the payload, upper
// ASCII-uppercases it, keywords lists the bracketed words of the payload in
// order of appearance separated by single spaces.
Dataset generate_task(const GeneratorSpec& spec);

// Text after the "<tag>: " prefix, or the whole prompt if there is none.
std::string_view payload_of(std::string_view prompt);

// Marked words of a keywords payload, in order of appearance.
std::vector<std::string> marked_words(std::string_view payload);

struct Split {
  Dataset train;
  Dataset held_out;
};

// The last ceil(fraction * n) samples in stable order are held out.
Split split_held_out(const Dataset& dataset, double fraction = 0.1);

// Deterministic reordering with a seeded permutation.
Dataset shuffled(const Dataset& dataset, std::uint64_t seed);

}  // namespace rlsr::data
