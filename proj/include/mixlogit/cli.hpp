#pragma once

namespace mixlogit {

// Entry point of the command-line tool; returns the process exit status.
// Subcommands: simulate, fit, predict, evaluate, elasticity.
int cli_main(int argc, const char* const* argv);

}  // namespace mixlogit
