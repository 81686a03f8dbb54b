#pragma once
// Subcommand dispatch for the toolkit binary.

#include <string>
#include <vector>

namespace nmtwp {

// args excludes the program name. Returns the process exit code: zero only
// when the command completed without error.
int run_cli(const std::vector<std::string>& args);

}  // namespace nmtwp
