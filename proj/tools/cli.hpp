#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dba::cli {

enum ExitCode { kOk = 0, kNotConverged = 1, kBadInput = 2, kSolverFailure = 3 };

/// Runs one command line (args[0] is the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dba::cli
