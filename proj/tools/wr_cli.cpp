#include <iostream>

#include "wr/cli.hpp"

int main(int argc, char** argv) { return wr::run_cli(argc, argv, std::cout, std::cerr); }
