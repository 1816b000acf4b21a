#pragma once

#include <iosfwd>

namespace wr {

/// Entry point of the `wr` tool. Returns 0 on success, 2 for usage and
/// configuration errors, 1 for data errors.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace wr
