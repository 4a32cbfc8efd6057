#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace csbp::cli {

/// Runs one command line (args exclude the program name). Returns 0 on
/// success, 1 when `verify` finds a statistical failure and 2 on
/// configuration or numerical errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace csbp::cli
