// One PASS/FAIL line per acceptance criterion; exit 1 if any fails.
//   acceptance_test [--only <criterion-or-group>]

#include <iostream>
#include <string>

#include "mppi_lab/acceptance.hpp"
#include "mppi_lab/errors.hpp"

int main(int argc, char** argv) {
  std::string only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      only = argv[++i];
    } else {
      std::cerr << "usage: acceptance_test [--only <criterion-or-group>]\n";
      return 2;
    }
  }
  try {
    const auto results = mppi_lab::run_acceptance(only, &std::cout);
    for (const auto& r : results) {
      if (!r.passed) return 1;
    }
    return 0;
  } catch (const mppi_lab::Error& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }
}
