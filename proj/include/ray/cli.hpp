#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ray {

inline constexpr const char* kVersion = "0.1.0";

/// Exit codes of the `ray` command.
enum ExitCode : int {
  kExitOk = 0,
  /// Parse or type errors, or a run that got stuck.
  kExitProgramError = 1,
  /// Conformance or observable-protocol violations.
  kExitViolation = 2,
  kExitUsage = 3,
};

/// Runs `ray` with `args` (without the program name). Machine output goes
/// to `out`, diagnostics to `err`.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ray
