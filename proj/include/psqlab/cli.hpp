#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace psqlab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name. Subcommands: run, solve, list-agents, dump-env.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace psqlab::cli
