// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#include "rlsr/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace rlsr::log {
namespace {

Level parse_env() {
  const char* v = std::getenv("RLSR_LOG");
  if (v == nullptr) return Level::kInfo;
  const std::string s(v);
  if (s == "quiet") return Level::kQuiet;
  if (s == "debug") return Level::kDebug;
  return Level::kInfo;
}

std::atomic<Level>& current() {
  static std::atomic<Level> l{parse_env()};
  return l;
}

std::mutex& sink_mutex() {
  static std::mutex mu;
  return mu;
}

void emit(std::string_view tag, std::string_view msg) {
  std::lock_guard lock(sink_mutex());
  std::cerr << "[rlsr " << tag << "] " << msg << '\n';
}

}  // namespace

Level level() { return current().load(); }
void set_level(Level l) { current().store(l); }
void init_from_env() { current().store(parse_env()); }

void info(std::string_view msg) {
  if (level() >= Level::kInfo) emit("info", msg);
}

void debug(std::string_view msg) {
  if (level() >= Level::kDebug) emit("debug", msg);
}

// Warnings are shown unless quiet.
void warn(std::string_view msg) {
  if (level() >= Level::kInfo) emit("warn", msg);
}

}  // namespace rlsr::log
