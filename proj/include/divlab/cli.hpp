#pragma once

#include <iosfwd>

namespace divlab {

// Exit codes: 0 ok, 2 contract error, 3 numeric failure, 4 search budget
// exceeded, 64 usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace divlab
