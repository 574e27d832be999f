#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mcrl {

// Entry point of the `mcrl` command; args excludes the program name.
// Returns the process exit code: 0 on success, 1 on runtime failure
// (including a failing gradcheck), 2 on usage errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mcrl
