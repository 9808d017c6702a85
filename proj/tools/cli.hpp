#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace forge::cli {

enum ExitCode : int { kOk = 0, kDomainError = 1, kUsageError = 2 };

// Runs one `forge` invocation. `args` excludes the program name.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// SHA-256 of a file's bytes, lowercase hex.
std::string sha256_file(const std::string& path);

}  // namespace forge::cli
