#include <iostream>

#include "mscale/cli.hpp"

int main(int argc, char** argv) { return mscale::cli::run_cli(argc, argv, std::cout, std::cerr); }
