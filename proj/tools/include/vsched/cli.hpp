#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vsched::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitValidation = 3;
inline constexpr int kExitRuntime = 4;

/// Name of the environment variable holding the default output directory.
inline constexpr const char* kOutDirEnv = "VSCHED_OUT_DIR";

/// Runs one command line (without the program name). Errors are reported on
/// `err` and mapped to exit codes; nothing escapes as an exception.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vsched::cli
