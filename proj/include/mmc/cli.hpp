#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mmc::cli {

/// Exit codes shared by every subcommand.
enum ExitCode : int { kOk = 0, kUsage = 1, kModelError = 2, kRuntimeError = 3 };

/// Run the command-line interface. `args` excludes the program name.
/// Flags can also be supplied through MMC_<FLAG> environment variables or a
/// --config file; explicit flags take precedence.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mmc::cli
