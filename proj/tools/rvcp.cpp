#include <iostream>
#include <string>
#include <vector>

#include "rvcp/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return rvcp::run_cli(args, std::cout, std::cerr);
}
