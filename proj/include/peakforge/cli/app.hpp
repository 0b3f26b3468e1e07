#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace peakforge::cli {

enum ExitCode : int {
  exit_success = 0,
  exit_validation = 2,
  exit_numerical = 3,
  exit_not_converged = 4,
};

/// Entry point of the command-line tool; args excludes the program name.
/// Subcommands: fit, recommend, generate, sweep-kappa.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace peakforge::cli
