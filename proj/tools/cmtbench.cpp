#include <iostream>
#include <string>
#include <vector>

#include "cmtbench/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return cmtbench::run_cli(args, std::cout, std::cerr);
}
