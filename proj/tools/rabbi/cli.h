#pragma once

namespace rabbi::cli {

// Parses argv, runs one subcommand and returns its exit code.
int run(int argc, char** argv);

}  // namespace rabbi::cli
