#pragma once
// Command layer, callable from main() and from tests.

#include <string>
#include <vector>

namespace flowecon::cli {

/// Dispatches one invocation (args exclude the program name).  Returns the
/// process exit code: 0 on success, 1 when a verification or calibration
/// check fails, 2 on usage or configuration errors.
int run(const std::vector<std::string>& args);

}  // namespace flowecon::cli
