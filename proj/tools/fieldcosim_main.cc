#include <iostream>
#include <string>
#include <vector>

#include "fieldcosim/cli.h"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return fieldcosim::run_cli(args, std::cout, std::cerr);
}
