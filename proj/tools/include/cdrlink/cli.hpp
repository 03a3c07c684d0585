#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cdrlink::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFatal = 1;
inline constexpr int kExitValidation = 2;

/// Runs one subcommand; `args` excludes the program name.
/// Returns 0 on success, 2 on usage or validation failure, 1 on fatal error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cdrlink::cli
