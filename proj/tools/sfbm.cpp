#include "sfbm/cli.hpp"

int main(int argc, char** argv) { return sfbm::run_cli(argc, argv); }
