#include <iostream>

#include "rpmem/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return rpmem::run_cli(args, std::cout, std::cerr);
}
