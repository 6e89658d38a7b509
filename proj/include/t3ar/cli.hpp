#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace t3ar {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitRuntime = 1, kExitConfig = 2 };

/// Runs one command. `args` excludes the program name. Normal output goes
/// to `out`, the single-line diagnostic to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace t3ar
