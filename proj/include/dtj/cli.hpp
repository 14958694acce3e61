#pragma once

#include <string>
#include <vector>

namespace dtj {

/// Entry point behind the `dtj` binary; exposed so tests can drive the CLI
/// in-process. Returns the process exit status.
int run_cli(const std::vector<std::string>& args);

}  // namespace dtj
