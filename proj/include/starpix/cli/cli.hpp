#pragma once

namespace starpix::cli {

// Parses argv and runs the selected subcommand. Returns the process exit
// code: 0 on success, 1 on a usage error (unknown subcommand or flag,
// missing or malformed arguments), 2 when the command itself fails.
int dispatch(int argc, const char* const* argv);

}  // namespace starpix::cli
