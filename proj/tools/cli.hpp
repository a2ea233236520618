#pragma once

#include <iosfwd>

namespace surfspline::cli {

/// Exit codes of the command-line tool; scripts depend on these values.
enum ExitCode : int { ok = 0, numerical_failure = 1, input_error = 2 };

/// Parses and runs one command. Normal output goes to `out`, diagnostics to `err`.
/// Never throws: every failure is reported on `err` and mapped to an exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace surfspline::cli
