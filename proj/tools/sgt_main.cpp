#include "sgt/cli.hpp"

#include <unistd.h>

#include <iostream>

int main(int argc, char** argv) {
  return sgt::run_cli(argc, argv, std::cout, std::cerr, isatty(STDOUT_FILENO) != 0);
}
