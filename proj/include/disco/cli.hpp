#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace disco {

// Runs one subcommand (eval-loss, analyze, train, sweep, discover, replay).
// `args` excludes the program name. Returns 0 on success, 1 on runtime
// errors and 2 on usage or configuration errors.
int run_command(const std::vector<std::string>& args, std::ostream& out,
                std::ostream& err);

}  // namespace disco
