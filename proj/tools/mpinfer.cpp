#include <iostream>

#include "mpinfer/cli.hpp"

int main(int argc, char** argv) { return mpinfer::run_cli(argc, argv, std::cout, std::cerr); }
