#include <iostream>

#include "ray/cli.hpp"

int main(int argc, char** argv) {
  return ray::cli_main(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
