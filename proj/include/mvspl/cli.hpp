#pragma once

namespace mvspl {

// Runs one subcommand. Exit codes: 0 success, 1 usage/precondition error,
// 2 I/O error, 3 stage failure.
int dispatch(int argc, const char* const* argv);

}  // namespace mvspl
