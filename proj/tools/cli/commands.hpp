#pragma once

#include <iosfwd>
#include <span>
#include <string>

namespace moje::cli {

enum ExitCode : int { kOk = 0, kRuntimeError = 1, kUsageError = 2 };

/// Runs the `moje` command line. `args` excludes the program name.
int run(std::span<const std::string> args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace moje::cli
