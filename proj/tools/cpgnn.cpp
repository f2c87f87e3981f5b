#include <iostream>
#include <string>
#include <vector>

#include "cpgnn/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return cpgnn::cli::run(args, std::cout, std::cerr);
}
