#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "varexp/mesh.hpp"

namespace varexp::cli {

enum ExitCode : int {
    kOk = 0,
    kConfigError = 2,
    kSolverFailure = 3,
    kContractFailure = 4,
};

/// Runs the command line `args` (args[0] is the program name). Human-readable
/// progress goes to `out`; error JSON for nonzero exits goes to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Node table with columns x[,y],u in node order, 17 significant digits.
void write_field_csv(std::ostream& os, const Field& u);

} // namespace varexp::cli
