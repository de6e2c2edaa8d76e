#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace plucker::cli {

// Exit codes: 0 success, 1 validation or domain failure (one-line diagnostic
// on `err`), 2 usage error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Value of PLUCKER_RIG_THREADS (0 = auto); 1 when unset or malformed.
unsigned thread_limit_from_env();

}  // namespace plucker::cli
