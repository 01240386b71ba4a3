#pragma once

#include <span>
#include <string>

namespace tsen {

/// Entry point of the `tsen` tool. Returns 0 on success, 2 on usage errors
/// (bad flags, unknown subcommand, invalid config) and 1 on runtime
/// failures; failures also print a one-line JSON error to stderr.
int run_cli(int argc, char** argv);
/// Same, with the program name excluded from `args`.
int run_cli(std::span<const std::string> args);

}  // namespace tsen
