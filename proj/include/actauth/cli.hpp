#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace actauth::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitBadConfig = 2;

// Every long flag can also be given as ACTAUTH_<FLAG> (upper case, dashes as underscores).
inline constexpr const char* kEnvPrefix = "ACTAUTH_";

// Runs one command line (args excludes the program name) and returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);

}  // namespace actauth::cli
