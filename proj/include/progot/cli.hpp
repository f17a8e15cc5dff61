#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace progot {

/// Exit codes: 0 success, 1 unexpected failure, 2 bad usage or input,
/// 3 solver non-convergence under --strict.
int cli_main(int argc, char** argv);

/// Same, with explicit streams; args excludes the program name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace progot
