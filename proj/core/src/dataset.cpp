// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#include "rlsr/dataset.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>

#include "json_bytes.hpp"
#include "rlsr/errors.hpp"
#include "rlsr/rng.hpp"

namespace rlsr::data {
namespace {

constexpr std::string_view kTagSeparator = ": ";

constexpr std::array<std::string_view, 20> kKeywords = {
    "apple", "brick", "cloud", "dance", "eagle", "flame", "grape", "house", "juice", "knife",
    "lemon", "mango", "night", "ocean", "piano", "river", "stone", "tiger", "water", "zebra"};

constexpr std::array<std::string_view, 8> kFillers = {"the", "a", "is", "on",
                                                      "and", "of", "to", "in"};

std::string random_letters(CounterRng& rng, std::size_t len, bool mixed_case) {
  std::string s(len, 'a');
  for (auto& c : s) {
    const auto k = rng.below(mixed_case ? 52 : 26);
    c = k < 26 ? static_cast<char>('a' + k) : static_cast<char>('A' + (k - 26));
  }
  return s;
}

std::size_t draw_length(CounterRng& rng, std::size_t lo, std::size_t hi) {
  return lo + rng.below(hi - lo + 1);
}

Sample make_keywords(CounterRng& rng, std::size_t k) {
  std::string payload;
  std::string answer;
  std::vector<std::size_t> used;
  auto append_word = [&payload](std::string_view w) {
    if (!payload.empty()) payload.push_back(' ');
    payload.append(w);
  };
  for (std::size_t i = 0; i < k; ++i) {
    if (rng.below(2) == 1) append_word(kFillers[rng.below(kFillers.size())]);
    std::size_t w = 0;
    // Distinct keywords within one prompt.
    do {
      w = rng.below(kKeywords.size());
    } while (std::find(used.begin(), used.end(), w) != used.end());
    used.push_back(w);
    append_word("[" + std::string(kKeywords[w]) + "]");
    if (!answer.empty()) answer.push_back(' ');
    answer.append(kKeywords[w]);
  }
  if (rng.below(2) == 1) append_word(kFillers[rng.below(kFillers.size())]);
  return {std::string(task_tag(TaskKind::kKeywords)) + std::string(kTagSeparator) + payload,
          answer};
}

}  // namespace

LoadResult load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset " + path.string());
  LoadResult result;
  result.dataset.provenance = path.string();
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    try {
      const auto obj = nlohmann::json::parse(line);
      if (!obj.is_object()) throw std::invalid_argument("not an object");
      auto prompt = detail::get_bytes(obj, "prompt");
      auto response = detail::get_bytes(obj, "response");
      if (!prompt || !response || prompt->empty() || response->empty()) {
        ++result.skipped;
        continue;
      }
      result.dataset.samples.push_back({std::move(*prompt), std::move(*response)});
    } catch (const std::exception&) {
      ++result.skipped;
    }
  }
  if (in.bad()) throw IoError("read failure on " + path.string());
  return result;
}

void write_jsonl(const std::filesystem::path& path, const Dataset& dataset) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write dataset " + path.string());
  for (const auto& s : dataset.samples) {
    nlohmann::json obj = nlohmann::json::object();
    detail::put_bytes(obj, "prompt", s.prompt);
    detail::put_bytes(obj, "response", s.response);
    out << obj.dump() << '\n';
  }
  if (!out) throw IoError("write failure on " + path.string());
}

std::string_view task_tag(TaskKind kind) {
  switch (kind) {
    case TaskKind::kCopy: return "copy";
    case TaskKind::kUpper: return "upper";
    case TaskKind::kKeywords: return "keywords";
  }
  return "unknown";
}

TaskKind parse_task_kind(std::string_view name) {
  if (name == "copy") return TaskKind::kCopy;
  if (name == "upper") return TaskKind::kUpper;
  if (name == "keywords") return TaskKind::kKeywords;
  throw UsageError("unknown task kind '" + std::string(name) +
                   "' (expected copy, upper or keywords)");
}

Dataset generate_task(const GeneratorSpec& spec) {
  if (spec.n == 0) throw UsageError("generate_task: n must be at least 1");
  if (spec.min_len == 0 || spec.min_len > spec.max_len) {
    throw UsageError("generate_task: invalid length range");
  }
  if (spec.kind == TaskKind::kKeywords && spec.max_len > kKeywords.size()) {
    throw UsageError("generate_task: at most " + std::to_string(kKeywords.size()) +
                     " keywords per prompt");
  }
  Dataset ds;
  ds.provenance = std::string(task_tag(spec.kind)) + ":n=" + std::to_string(spec.n) +
                  ":seed=" + std::to_string(spec.seed) + ":len=" + std::to_string(spec.min_len) +
                  "-" + std::to_string(spec.max_len);
  ds.samples.reserve(spec.n);
  const std::string prefix = std::string(task_tag(spec.kind)) + std::string(kTagSeparator);
  for (std::size_t i = 0; i < spec.n; ++i) {
    CounterRng rng(spec.seed, i);
    const std::size_t len = draw_length(rng, spec.min_len, spec.max_len);
    switch (spec.kind) {
      case TaskKind::kCopy: {
        auto payload = random_letters(rng, len, false);
        ds.samples.push_back({prefix + payload, payload});
        break;
      }
      case TaskKind::kUpper: {
        auto payload = random_letters(rng, len, true);
        std::string upper = payload;
        for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        ds.samples.push_back({prefix + payload, upper});
        break;
      }
      case TaskKind::kKeywords:
        ds.samples.push_back(make_keywords(rng, len));
        break;
    }
  }
  return ds;
}

std::string_view payload_of(std::string_view prompt) {
  const auto pos = prompt.find(kTagSeparator);
  if (pos == std::string_view::npos) return prompt;
  return prompt.substr(pos + kTagSeparator.size());
}

std::vector<std::string> marked_words(std::string_view payload) {
  std::vector<std::string> words;
  std::size_t pos = 0;
  while ((pos = payload.find('[', pos)) != std::string_view::npos) {
    const auto close = payload.find(']', pos);
    if (close == std::string_view::npos) break;
    words.emplace_back(payload.substr(pos + 1, close - pos - 1));
    pos = close + 1;
  }
  return words;
}

Split split_held_out(const Dataset& dataset, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw ContractError("split_held_out: fraction must lie in [0, 1)");
  }
  const auto n = dataset.size();
  const auto held = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
  Split split;
  split.train.provenance = dataset.provenance + "#train";
  split.held_out.provenance = dataset.provenance + "#held-out";
  split.train.samples.assign(dataset.samples.begin(), dataset.samples.end() - held);
  split.held_out.samples.assign(dataset.samples.end() - held, dataset.samples.end());
  return split;
}

Dataset shuffled(const Dataset& dataset, std::uint64_t seed) {
  Dataset out;
  out.provenance = dataset.provenance + "#shuffle=" + std::to_string(seed);
  for (auto i : seeded_permutation(dataset.size(), seed)) out.samples.push_back(dataset.samples[i]);
  return out;
}

}  // namespace rlsr::data
