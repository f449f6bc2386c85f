#ifndef SENTINEL_TOOLS_CLI_H_
#define SENTINEL_TOOLS_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace sentinel {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFindings = 1;
inline constexpr int kExitError = 2;

// Runs the `sentinel` command line. `args` excludes the program name.
int CliRun(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sentinel

#endif  // SENTINEL_TOOLS_CLI_H_
