#include <iostream>

#include "ivins/cli.hpp"

int main(int argc, char** argv) { return ivins::run_cli(argc, argv, std::cout, std::cerr); }
