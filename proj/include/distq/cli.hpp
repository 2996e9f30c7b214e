#pragma once

#include <string>
#include <vector>

namespace distq::cli {

/// Dispatches one CLI invocation. Exit codes: 0 success, 1 usage error,
/// 2 runtime failure.
int run(const std::vector<std::string>& args);

int run(int argc, char** argv);

} // namespace distq::cli
