#include <iostream>
#include <string>
#include <vector>

#include "owr/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return owr::cli::run(args, std::cout, std::cerr);
}
