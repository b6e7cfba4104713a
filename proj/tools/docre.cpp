#include <iostream>
#include <string>
#include <vector>

#include "docre/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return docre::run_cli(args, std::cout, std::cerr);
}
