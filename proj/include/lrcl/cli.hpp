#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lrcl {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;       // bad flags or configuration
inline constexpr int kExitCorruption = 3;  // unreadable checkpoint or dataset
inline constexpr int kExitNumeric = 4;     // non-finite loss

/// Runs the command line `args` (without the program name) and returns the
/// process exit code. Never throws.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv);

}  // namespace lrcl
