#include <iostream>
#include <string>
#include <vector>

#include "nlos/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return nlos::cli::run(args, std::cout, std::cerr);
}
