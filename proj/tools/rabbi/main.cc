#include "rabbi/cli.h"

int main(int argc, char** argv) { return rabbi::cli::run(argc, argv); }
