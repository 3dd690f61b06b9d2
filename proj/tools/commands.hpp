#pragma once

namespace mirrorfield::cli {

// Entry point of the mirrorfield command; returns the process exit code
// (0 ok, 2 config error, 3 data error, 4 numeric failure).
int run(int argc, const char* const* argv);

}  // namespace mirrorfield::cli
