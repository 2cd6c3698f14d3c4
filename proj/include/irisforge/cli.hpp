#pragma once

#include <string>
#include <vector>

namespace irisforge::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUser = 1;
inline constexpr int kExitRuntime = 2;

// Parses and executes one subcommand. Diagnostics go to stderr.
int run(const std::vector<std::string>& args);
int run(int argc, char** argv);

}  // namespace irisforge::cli
