#include <iostream>
#include <string>
#include <vector>

#include "khelm/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return khelm::cli::run(args, std::cout, std::cerr);
}
