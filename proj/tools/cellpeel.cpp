#include <iostream>
#include <string>
#include <vector>

#include "cellpeel/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cellpeel::run_subcommand(args, std::cout, std::cerr);
}
