#include <iostream>

#include "cpmmg/cli.hpp"

int main(int argc, char** argv) { return cpmmg::run_cli(argc, argv, std::cout, std::cerr); }
