#include "causal_probe/cli.hpp"

int main(int argc, char** argv) { return causal_probe::cli::run_cli(argc, argv); }
