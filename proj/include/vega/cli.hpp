#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace vega {

// Entry point behind the `vega` binary. `args` excludes the program name.
// Machine-readable JSON goes to `out`; diagnostics go to `err`.
// Exit codes: 0 success, 2 parse/usage error, 3 no feasible path or missing
// power channel, 4 snap failure, 1 other errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vega
