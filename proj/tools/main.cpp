#include "pdcmodes/cli.hpp"

int main(int argc, char** argv) { return pdcmodes::run_cli(argc, argv); }
