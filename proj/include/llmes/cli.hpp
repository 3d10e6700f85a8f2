#pragma once

#include <iosfwd>

namespace llmes {

// Exit codes: 0 completed, 1 runtime failure, 2 usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace llmes
