#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace blm {

// Runs one CLI invocation; args excludes the program name. Failures print a
// single line "error: <category>: <message>" to `err` and map to exit codes
// 2 (usage/config), 3 (data/IO) and 4 (numeric).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace blm
