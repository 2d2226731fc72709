#pragma once

#include <iosfwd>

namespace inmt {

// Subcommands: train, translate, interactive, simulate, evaluate, serve,
// average, build-dict, score. Returns 0 on success, 1 on usage errors and
// 2 on runtime errors.
int cli_main(int argc, const char* const* argv, std::istream& in, std::ostream& out,
             std::ostream& err);
int cli_main(int argc, const char* const* argv);

}  // namespace inmt
