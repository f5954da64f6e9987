#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace fluidmc {

inline constexpr int kExitOk = 0;
inline constexpr int kExitIndeterminate = 1;
inline constexpr int kExitInputError = 2;
inline constexpr int kExitNumericError = 3;

/// Runs one `fluidmc` command. `args` excludes the program name. Returns the
/// process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fluidmc
