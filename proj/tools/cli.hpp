#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace rvos {

/// Exit codes: 0 ok, 1 degraded or metric below threshold, 2 usage, 3 fatal.
/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace rvos
