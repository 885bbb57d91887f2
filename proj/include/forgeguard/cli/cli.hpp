#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace forgeguard::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

// Runs one `forgeguard` invocation; args excludes the program name. Human
// output goes to out, diagnostics to err.
int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace forgeguard::cli
