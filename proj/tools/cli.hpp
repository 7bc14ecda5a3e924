#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vpl::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitBackend = 2;

/// Entry point of the `vpl` tool. `args` excludes the program name.
/// Settings resolve as command line > VPL_* environment > --config file >
/// built-in default.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vpl::cli
