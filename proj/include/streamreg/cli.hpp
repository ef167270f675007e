#ifndef STREAMREG_CLI_HPP
#define STREAMREG_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace streamreg {

/// Runs the command line tool on `args` (without the program name).
/// Returns 0 on success, 2 on a usage error and 1 on a runtime failure.
int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace streamreg

#endif
