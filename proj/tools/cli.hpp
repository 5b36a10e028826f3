// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rlsr::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

// Runs one command line (args[0] is the program name) and returns the exit code.
int cmd_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rlsr::cli
