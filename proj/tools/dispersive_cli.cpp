#include "dispersive/cli.hpp"

int main(int argc, char** argv) { return dispersive::cli::cli_main(argc, argv); }
