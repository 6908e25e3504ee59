#include <iostream>
#include <string>
#include <vector>

#include "hatebench/app.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return hatebench::app::run(args, std::cout, std::cerr);
}
