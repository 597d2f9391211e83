#include "reefmap/cli.hpp"

int main(int argc, char** argv) { return reefmap::cli::run_cli(argc, argv); }
