#pragma once

#include <string>
#include <vector>

namespace hbmc {

/// Runs one CLI invocation. `args` excludes the program name. Returns the
/// process exit code: 0 success, 2 usage or parse error, 3 numerical
/// failure, 4 I/O failure.
int run_cli(const std::vector<std::string>& args);

}  // namespace hbmc
