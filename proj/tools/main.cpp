#include "progot/cli.hpp"

int main(int argc, char** argv) { return progot::cli_main(argc, argv); }
