#pragma once

#include <string>
#include <vector>

namespace wsnm::app {

/// Runs one CLI invocation (args excludes the program name). Returns the
/// process exit status: 0 on success, 1 on runtime or solver failure, 2 on
/// usage or validation errors.
int run(const std::vector<std::string>& args);

}  // namespace wsnm::app
