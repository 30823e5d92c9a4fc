#include <iostream>

#include "trajproj/cli.hpp"

int main(int argc, char** argv) { return trajproj::run_cli(argc, argv, std::cout, std::cerr); }
