#pragma once
#include <ostream>
#include <string>
#include <vector>

namespace lowrank {

// Runs the command-line interface on the given arguments (program name
// excluded, natural order).  Returns the process exit code: 0 on success,
// 1 on input error, 2 on verification failure.
int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace lowrank
