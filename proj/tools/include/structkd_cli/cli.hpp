#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace structkd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // runtime error or verification failure
inline constexpr int kExitUsage = 2;

// Runs one command. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace structkd::cli
