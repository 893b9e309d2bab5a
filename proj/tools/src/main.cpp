#include <iostream>

#include "unoranic/cli/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return unoranic::cli::run(args, std::cout, std::cerr);
}
