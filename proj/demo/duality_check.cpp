// E[X_t^n Y_t^m] from the diffusion against the block-counting chain.
#include <iostream>

#include "seedbank/blockcount.hpp"
#include "seedbank/diffusion.hpp"

int main() {
  seedbank::ModelParams p;  // c = 1, K = 1
  const double x = 0.2, y = 0.8, t = 0.5;
  seedbank::IntegratorSettings set;
  set.dt = 1e-3;
  for (long n = 0; n <= 2; ++n) {
    for (long m = 0; m <= 2; ++m) {
      if (n + m == 0) continue;
      const auto lhs = seedbank::duality_lhs(p, x, y, n, m, t, 4000, 7, set);
      const auto rhs = seedbank::duality_rhs(n, m, x, y, p, t);
      std::cout << "(n,m)=(" << n << "," << m << ")  diffusion " << lhs.value << " +- " << lhs.stderr_mean
                << "  dual " << rhs.value << "\n";
    }
  }
}
