#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rpmem {

/// Runs one rpmem-check invocation. `args` excludes the program name.
/// Returns 0 on success, 1 when a Violated verdict is reported, 2 on usage
/// errors or an inconclusive exploration.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rpmem
