#include <iostream>

#include "forgeguard/cli/cli.hpp"

int main(int argc, char** argv) {
  return forgeguard::cli::run({argv + 1, argv + argc}, std::cout, std::cerr);
}
