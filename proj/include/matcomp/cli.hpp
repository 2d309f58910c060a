#pragma once

#include <iosfwd>

namespace matcomp {

// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitNumeric = 3,
  kExitDegenerateQuery = 4,
};

// Entry point of the `matcomp` executable, callable in-process. Output
// artifacts go to files; summaries to `out`; warnings and errors to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace matcomp
