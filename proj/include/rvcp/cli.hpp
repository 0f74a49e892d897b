#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rvcp {

/// Entry point behind the rvcp executable. args excludes the program name.
/// Returns 0 on success, 2 for input errors, 3 for statistical preconditions.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rvcp
