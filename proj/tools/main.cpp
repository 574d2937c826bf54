#include <iostream>

#include "screenaim/cli.hpp"

int main(int argc, char** argv) {
  return screenaim::cli::run_cli(argc, argv, std::cout, std::cerr);
}
