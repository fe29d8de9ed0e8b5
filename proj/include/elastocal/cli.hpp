#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace elastocal {

/// Exit codes of the command-line front end.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitParse = 2,
  kExitModel = 3,
  kExitNumeric = 4,
  kExitCheckFailed = 5,  // plan check ran but the plan is not optimal
};

/// Runs one command line (without the program name). Human-readable text goes
/// to `out`, diagnostics to `err`; files are written only to the paths given
/// by output options.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace elastocal
