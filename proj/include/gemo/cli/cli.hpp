// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>

namespace gemo::cli {

// Exit codes returned by run().
inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;  // bad flags, config, lexicons or data contents
inline constexpr int kExitRuntime = 2;  // I/O failure, divergence, failed gradient check

// Parses argv, dispatches the subcommand and maps errors to exit codes.
// Normal output goes to `out`; diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gemo::cli
