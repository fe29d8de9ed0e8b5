#include <iostream>
#include <string>
#include <vector>

#include "elastocal/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return elastocal::cli_main(args, std::cout, std::cerr);
}
