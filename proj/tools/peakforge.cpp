#include <iostream>

#include "peakforge/cli/app.hpp"

int main(int argc, char** argv) {
  return peakforge::cli::run_cli({argv + 1, argv + argc}, std::cout, std::cerr);
}
