#include <iostream>
#include <string>
#include <vector>

#include "plucker_rig/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return plucker::cli::run(args, std::cout, std::cerr);
}
