#pragma once

#include <iosfwd>

namespace trajproj {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitNumerical = 2 };

/// Runs the `trajproj` command line. Normal output goes to `out`,
/// diagnostics and usage text to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace trajproj
