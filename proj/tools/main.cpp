#include <iostream>

#include "ionpair/cli.hpp"

int main(int argc, char** argv) { return ionpair::run_cli(argc, argv, std::cout, std::cerr); }
