#include <iostream>
#include <string>
#include <vector>

#include "oculorl/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return oculorl::dispatch(args, std::cout, std::cerr);
}
