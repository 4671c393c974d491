#include <iostream>

#include "rydspec/cli/commands.hpp"

int main(int argc, char** argv) { return rydspec::cli::run_cli(argc, argv, std::cout, std::cerr); }
