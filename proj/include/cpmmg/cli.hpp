#pragma once

#include <iosfwd>

namespace cpmmg {

/// Command-line entry point. Returns 0 on success, 1 on invalid input and
/// 2 when the simulation fails.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cpmmg
