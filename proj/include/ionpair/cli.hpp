#pragma once

#include <iosfwd>

namespace ionpair {

// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitBadInput = 2,
  kExitNumerical = 3,
  kExitSelftest = 4,
};

/// Runs the ionpair command line. Output files are written only when the whole
/// command succeeds; CSV goes to `out` when no --out path is given.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Quick invariant checks, one line per check on `out`. Returns true if all pass.
bool run_selftest(std::ostream& out);

}  // namespace ionpair
