#include <iostream>
#include <string>
#include <vector>

#include "rlmsad/cli.hpp"

int main(int argc, char** argv) {
  return rlmsad::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
