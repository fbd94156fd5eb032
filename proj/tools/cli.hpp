#pragma once

#include <string>
#include <vector>

namespace fbcast::cli {

// Dispatches a command line (without the program name). Returns 0 on
// success, 1 on input errors, 2 on numeric or infeasibility errors.
int run(const std::vector<std::string>& args);

int run(int argc, const char* const* argv);

}  // namespace fbcast::cli
