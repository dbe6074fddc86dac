#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace care::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

/// Runs one `care` invocation. args[0] is the program name. JSON results go
/// to `out`, logs and error messages to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace care::cli
