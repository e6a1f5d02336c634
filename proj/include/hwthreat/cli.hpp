#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hwthreat {

// Exit codes: 0 success, 1 internal error, 2 usage error, 3 invalid input,
// 4 not found, 5 conflict with the session state, 6 model provider failure.
enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitUsage = 2,
  kExitClient = 3,
  kExitNotFound = 4,
  kExitConflict = 5,
  kExitUpstream = 6,
};

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace hwthreat
