#pragma once

#include <iosfwd>

namespace screenaim::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

// Parses argv and runs one subcommand. Output goes to `out`, diagnostics to
// `err`. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace screenaim::cli
