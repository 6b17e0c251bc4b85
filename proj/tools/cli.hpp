#pragma once

#include <iosfwd>

namespace ttt::cli {

// Entry point of the tttrecon tool. Returns the process exit code; errors are
// reported on `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ttt::cli
