#pragma once

// Single-executable front end. Every pipeline stage is a subcommand; every
// run writes its fully resolved configuration next to its outputs. Exit
// codes: 0 success, 1 validation error, 2 I/O error, 64 usage error.

#include <string>
#include <vector>

namespace lrbench {

// args = {subcommand, flags...}, i.e. argv without the program name.
int dispatch(const std::vector<std::string>& args);

}  // namespace lrbench
