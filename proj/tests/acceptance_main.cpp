#include <iostream>

#include "seedbank/acceptance.hpp"

int main() {
  const unsigned workers = seedbank::default_workers();
  const auto results = seedbank::run_acceptance(1, workers, workers == 1 ? 2 : 1, std::cout);
  std::size_t passed = 0;
  for (const auto& r : results) passed += r.pass;
  std::cout << passed << "/" << results.size() << " criteria passed" << std::endl;
  return passed == results.size() ? 0 : 1;
}
