#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace remtime::cli {

/// Runs one command line (without the program name). Returns the exit status:
/// 0 success, 1 configuration or runtime error, 2 usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace remtime::cli
