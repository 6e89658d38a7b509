#include <iostream>
#include <string>
#include <vector>

#include "t3ar/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return t3ar::run_cli(args, std::cout, std::cerr);
}
