#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace orthomem {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,       // bad flags, invalid config or input file contents
  kExitIo = 3,          // file could not be read or written
  kExitNumerical = 4,   // numerical degeneracy, e.g. rank-deficient polar factor
};

/// Run one CLI invocation. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace orthomem
