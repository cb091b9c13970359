#pragma once

#include <string>
#include <vector>

namespace unts {

// Exit codes: 0 success, 1 internal failure, 2 usage/config error.
// args excludes the program name.
int cli_main(const std::vector<std::string>& args);

} // namespace unts
