#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace rmi {

inline constexpr int kExitUsage = 64;

// Runs the rmicheck command line; args exclude the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rmi
