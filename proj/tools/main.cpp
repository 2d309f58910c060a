#include <iostream>

#include "matcomp/cli.hpp"

int main(int argc, char** argv) { return matcomp::run_cli(argc, argv, std::cout, std::cerr); }
