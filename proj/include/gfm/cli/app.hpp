#pragma once

namespace gfm::cli {

// Parses arguments and runs one subcommand. Returns the process exit code:
// 0 success, 1 domain error, 2 usage or configuration error.
int run(int argc, const char* const* argv);

}  // namespace gfm::cli
