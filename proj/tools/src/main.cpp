// SPDX-License-Identifier: Apache-2.0
#include <exception>
#include <iostream>

#include "mtlf/cli/commands.hpp"

int main(int argc, char** argv) {
  try {
    return mtlf::cli::run_cli({argv + 1, argv + argc}, std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << '\n';
    return 1;
  }
}
