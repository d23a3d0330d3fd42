#pragma once

#include <iosfwd>

namespace acerl::cli {

// Exit codes
inline constexpr int kOk = 0;
inline constexpr int kConfigError = 1;  // I/O, parse, schema or argument errors
inline constexpr int kNumericalError = 2;

/// Parses argv and runs one subcommand: simulate, fit, tasks, experiment or tune.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace acerl::cli
