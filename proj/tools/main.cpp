#include <iostream>

#include "direct6d/app/commands.hpp"

int main(int argc, char** argv) {
  return direct6d::app::run_cli(argc, argv, std::cout, std::cerr);
}
