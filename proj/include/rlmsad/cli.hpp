#ifndef RLMSAD_CLI_HPP_
#define RLMSAD_CLI_HPP_

#include <ostream>
#include <string>
#include <vector>

namespace rlmsad::cli {

// Runs the command line `args` (args[0] is the program name) and returns the
// process exit code: 0 ok, 2 config error, 3 data error, 4 runtime failure.
// Failures also print one machine-readable line to `err`:
//   rlmsad-error {"exit_code":2,"kind":"config","message":"...","subcommand":"train"}
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rlmsad::cli

#endif  // RLMSAD_CLI_HPP_
