#include "divlab/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return divlab::run_cli(argc, argv, std::cout, std::cerr); }
