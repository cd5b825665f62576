#pragma once

#include <string>
#include <vector>

namespace dpcn {

// Runs one CLI invocation (argv without the program name is fine too; the
// first element is treated as the program name when present). Returns the
// process exit status; errors print one line to stderr.
int execute_command(const std::vector<std::string>& argv);

} // namespace dpcn
