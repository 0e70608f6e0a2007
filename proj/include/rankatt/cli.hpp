#pragma once

#include <string>
#include <vector>

namespace rankatt {

// Exit codes: 0 success, 2 bad flags, 3 data errors, 4 numeric failures.
int cli_main(int argc, const char* const* argv);
int cli_main(const std::vector<std::string>& args);  // args without argv[0]

}  // namespace rankatt
