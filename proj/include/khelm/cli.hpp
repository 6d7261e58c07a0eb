#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace khelm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumerical = 2;

/// Entry point behind the `khelm` binary. args[0] is the program name.
/// Results go to files and `out`; progress and errors go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace khelm::cli
