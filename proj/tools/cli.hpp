#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cavio::cli {

enum ExitCode : int { kSuccess = 0, kNumericalFailure = 1, kValidationFailure = 2 };

// Entry point shared by the executable and the tests. args[0] is the
// program name. Diagnostics go to `err`, progress lines to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cavio::cli
