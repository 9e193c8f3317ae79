#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace envforge::cli {

enum ExitCode : int { kOk = 0, kValidationFailed = 1, kRuntimeError = 2 };

/// Parses argv (argv[0] is the program name) and runs one subcommand.
int dispatch(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

}  // namespace envforge::cli
