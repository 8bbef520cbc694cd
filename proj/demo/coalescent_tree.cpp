// Simulates one seed bank genealogy and compares its branch lengths with the
// exact expectations.
#include <iostream>

#include "seedbank/blockcount.hpp"
#include "seedbank/coalescent.hpp"

int main() {
  seedbank::ModelParams p;
  p.c = 1.0;
  p.K = 0.5;
  p.lambda_ad = seedbank::SwitchingMeasure::atom(0.5, 0.4);

  const auto g = seedbank::simulate_coalescent(5, 1, p, seedbank::StopRule::mrca(), 42);
  const auto [active, dormant] = seedbank::branch_lengths(g);
  const auto exact = seedbank::first_step_analysis({5, 1}, p);

  std::cout << seedbank::to_newick(g) << "\n";
  std::cout << "T_MRCA " << g.end_time << " (expected " << exact.tmrca << ")\n";
  std::cout << "active length " << active << " (expected " << exact.active_length << ")\n";
  std::cout << "dormant length " << dormant << " (expected " << exact.dormant_length << ")\n";
}
