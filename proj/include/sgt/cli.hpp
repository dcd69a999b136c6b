#pragma once

#include <iosfwd>

namespace sgt {

// Entry point of the sgt tool.  Human-readable output is used only when
// `terminal` is set and --json is absent; otherwise stdout carries JSON (or
// DFS lines for `sample`).  Errors go to `err` as one line of JSON.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err, bool terminal);

}  // namespace sgt
