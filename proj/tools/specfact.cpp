#include <iostream>
#include <string>
#include <vector>

#include "lowrank/cli.hpp"

int main(int argc, char** argv) {
  return lowrank::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout,
                          std::cerr);
}
