#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace storyframe::cli {

// Runs the storyframe command line. `args` excludes the program name.
// Results go to `out`; failures print {"error", "message", ...} to `err`
// and return a non-zero code (2 for usage errors, 1 otherwise).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace storyframe::cli
