#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace oculorl {

inline constexpr const char* kToolVersion = "1.0.0";

/// Runs one command line (without the program name). Returns the exit code:
/// 0 on success, 1 on a runtime failure, 2 on a usage error.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace oculorl
