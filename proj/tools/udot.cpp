#include "udot/cli.hpp"

int main(int argc, char** argv) { return udot::run_cli(argc, argv); }
