#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fdi::cli {

enum ExitCode { kOk = 0, kConfigError = 1, kRuntimeError = 2 };

/// Parses `args` (without the program name) and runs one experiment command.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

}  // namespace fdi::cli
