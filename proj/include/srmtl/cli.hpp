#pragma once

namespace srmtl::cli {

// Entry point shared by the srmtl binary and the CLI tests.
// Returns 0 on success, 1 on validation failure, 2 on numerical failure.
int run(int argc, const char* const* argv);

}  // namespace srmtl::cli
