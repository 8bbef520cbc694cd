// Fixation of type 0 in the Wright-Fisher model and in the diffusion.
#include <iostream>

#include "seedbank/diffusion.hpp"
#include "seedbank/forward_wf.hpp"

int main() {
  const double x = 0.3, y = 0.7, K = 2.0;
  seedbank::WFConfig wf;
  wf.N = 100;
  wf.K = K;
  wf.c = 1;
  const auto w = seedbank::wf_fixation(wf, x, y, 1000000, 2000, 3);

  seedbank::ModelParams p;
  p.K = K;
  seedbank::IntegratorSettings set;
  set.dt = 1e-3;
  set.horizon = 200;
  set.boundary_tol = 1e-2;
  const auto d = seedbank::diffusion_fixation(p, {x, y}, set, 2000, 3);

  std::cout << "(y + xK)/(1 + K) = " << (y + x * K) / (1 + K) << "\n";
  std::cout << "Wright-Fisher N=100: " << w.frequency() << " +- " << w.stderr_frequency() << "\n";
  std::cout << "diffusion:           " << d.frequency() << " +- " << d.stderr_frequency() << "\n";
}
