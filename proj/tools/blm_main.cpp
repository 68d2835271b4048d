#include <iostream>

#include "blm/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return blm::run_cli(args, std::cout, std::cerr);
}
