#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace l2r {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomainError = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `l2r` command. `args` excludes the program name.
/// Returns 0 on success, 1 on a domain error, 2 on a usage error.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace l2r
