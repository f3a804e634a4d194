#include <iostream>

#include "cyclone/cli/commands.hpp"

int main(int argc, char** argv) {
  return cyclone::cli::run_cli(argc, argv, std::cout, std::cerr);
}
