// Copyright 2026 The cplopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace cplopt::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumerical = 2;

/// Runs one command; `args` excludes the program name. Returns the process exit code:
/// 0 on success, 1 on usage errors or malformed inputs, 2 on a numerical abort.
int run(const std::vector<std::string>& args);

}  // namespace cplopt::cli
