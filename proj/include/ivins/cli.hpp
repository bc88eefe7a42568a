#pragma once

#include <iosfwd>

namespace ivins {

inline constexpr int kExitOk = 0;
inline constexpr int kExitThreshold = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `ivins` tool: subcommands simulate, invariance and
/// jacobians. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ivins
