#include <iostream>
#include <string>
#include <vector>

#include "ampsynth/cli.hpp"

int main(int argc, char** argv) {
  return ampsynth::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
