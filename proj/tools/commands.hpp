#pragma once

namespace occ::cli {

// Parses argv, runs one subcommand and returns the process exit code:
// 0 success, 2 usage or invalid input, 3 unreadable or malformed files,
// 4 numeric failure or nothing to reduce over.
int run(int argc, char** argv);

}  // namespace occ::cli
