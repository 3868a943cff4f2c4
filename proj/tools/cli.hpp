#pragma once

#include <iosfwd>

namespace ckg::cli {

// Exit codes: 0 success, 1 usage or configuration error, 2 data or parse
// error, 3 numeric failure.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ckg::cli
