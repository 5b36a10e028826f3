// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string_view>

// Minimal stderr logger. The level comes from RLSR_LOG (quiet, info, debug;
// default info) unless set explicitly.
namespace rlsr::log {

enum class Level { kQuiet = 0, kInfo = 1, kDebug = 2 };

Level level();
void set_level(Level l);
// Re-reads RLSR_LOG.
void init_from_env();

void info(std::string_view msg);
void debug(std::string_view msg);
void warn(std::string_view msg);

}  // namespace rlsr::log
