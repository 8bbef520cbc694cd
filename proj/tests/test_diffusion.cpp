#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "seedbank/diffusion.hpp"

using namespace seedbank;

namespace {

ModelParams plain(double c, double K) {
  ModelParams p;
  p.c = c;
  p.K = K;
  return p;
}

IntegratorSettings settings(double dt, double T) {
  IntegratorSettings s;
  s.dt = dt;
  s.horizon = T;
  return s;
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

}  // namespace

TEST(Diffusion, RejectsInvalidInput) {
  EXPECT_THROW(integrate(plain(1, 1), {1.2, 0.5}, settings(1e-3, 1), 1), std::domain_error);
  EXPECT_THROW(integrate(plain(1, 1), {0.5, -0.1}, settings(1e-3, 1), 1), std::domain_error);
  EXPECT_THROW(integrate(plain(1, 1), {0.5, 0.5}, settings(2, 1), 1), std::domain_error);
  auto s = settings(1e-3, 1);
  s.eps = 0.0;
  EXPECT_THROW(integrate(plain(1, 1), {0.5, 0.5}, s, 1), std::domain_error);
}

TEST(Diffusion, OriginIsAbsorbing) {
  const auto tr = integrate(plain(1, 1), {0, 0}, settings(1e-3, 2), 3);
  for (const auto& s : tr.states) EXPECT_EQ(s, (DiffusionState{0, 0}));
  EXPECT_TRUE(tr.hit_00);
  EXPECT_TRUE(tr.ran_to_horizon);
}

TEST(Diffusion, NoiseFreeMatchesLinearSystem) {
  for (double dt : {1e-3, 5e-4}) {
    auto s = settings(dt, 2);
    s.noise = false;
    const auto tr = integrate(plain(1, 1), {1, 0}, s, 4);
    double worst = 0.0;
    for (std::size_t k = 0; k < tr.times.size(); ++k) {
      const double x = 0.5 + 0.5 * std::exp(-2 * tr.times[k]);
      worst = std::max({worst, std::abs(tr.states[k].x - x), std::abs(tr.states[k].y - (1 - x))});
    }
    EXPECT_LE(worst, dt);
  }
}

TEST(Diffusion, StateStaysInUnitSquare) {
  ModelParams p = plain(2, 0.7);
  p.u1 = 0.2;
  p.u2 = 0.4;
  p.u1p = 0.1;
  p.u2p = 0.3;
  p.lambda_ad = SwitchingMeasure({{0.9, 0.5}}, {{2, 3, 0.7}});
  p.lambda_da = SwitchingMeasure({{1.0, 0.3}}, {{1.5, 1, 0.4}});
  auto s = settings(1e-2, 20);
  s.eps = 0.05;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto tr = integrate(p, {0.02, 0.97}, s, seed);
    for (std::size_t k = 0; k < tr.states.size(); ++k) {
      ASSERT_GE(tr.states[k].x, 0.0);
      ASSERT_LE(tr.states[k].x, 1.0);
      ASSERT_GE(tr.states[k].y, 0.0);
      ASSERT_LE(tr.states[k].y, 1.0);
      if (k) {
        ASSERT_GT(tr.times[k], tr.times[k - 1]);
      }
    }
    for (const auto& j : tr.jumps) {
      EXPECT_GE(j.z, s.eps);
      EXPECT_LE(j.z, 1.0);
    }
  }
}

TEST(Diffusion, Deterministic) {
  ModelParams p = plain(1, 1);
  p.lambda_ad = SwitchingMeasure::atom(0.5, 0.5);
  const auto a = integrate(p, {0.3, 0.6}, settings(1e-3, 3), 17);
  const auto b = integrate(p, {0.3, 0.6}, settings(1e-3, 3), 17);
  EXPECT_EQ(a.states, b.states);
  EXPECT_EQ(a.times, b.times);
}

TEST(Diffusion, CheckpointsLandOnTime) {
  auto s = settings(0.1, 1);
  s.checkpoints = {0.0, 0.25, 0.5, 1.0};
  s.noise = false;
  const auto tr = integrate(plain(1, 1), {1, 0}, s, 1);
  ASSERT_EQ(tr.checkpoint_states.size(), 4u);
  EXPECT_EQ(tr.checkpoint_states[0], (DiffusionState{1, 0}));
  EXPECT_EQ(tr.checkpoint_states[3], tr.final_state());
  EXPECT_DOUBLE_EQ(tr.end_time, 1.0);
}

TEST(Diffusion, AtomJumpRate) {
  const double z = 0.4, w = 0.3;
  for (bool active : {true, false}) {
    ModelParams p = plain(1, 1);
    (active ? p.lambda_ad : p.lambda_da) = SwitchingMeasure::atom(z, w);
    auto s = settings(0.01, 400);
    s.record_every = 0;
    const auto tr = integrate(p, {0.5, 0.5}, s, 5);
    const auto n = std::count_if(tr.jumps.begin(), tr.jumps.end(), [&](const JumpEvent& j) {
      return j.type == (active ? JumpType::F : JumpType::D);
    });
    EXPECT_EQ(static_cast<std::size_t>(n), tr.jumps.size());
    const double rate = static_cast<double>(n) / 400.0;
    EXPECT_LE(std::abs(rate - w / z), 3 * std::sqrt(w / z / 400.0));
    for (const auto& j : tr.jumps) EXPECT_EQ(j.z, z);
  }
}

TEST(Diffusion, BetaJumpRateAndSizes) {
  // Beta(2,2) above 0.25: activity 1.6875, mass 0.84375, so the mean size is 0.5.
  ModelParams p = plain(1, 1);
  p.lambda_ad = SwitchingMeasure::beta(2, 2, 1.0);
  auto s = settings(0.01, 2000);
  s.eps = 0.25;
  s.record_every = 0;
  const auto tr = integrate(p, {0.5, 0.5}, s, 6);
  const double n = static_cast<double>(tr.jumps.size());
  EXPECT_LE(std::abs(n / 2000.0 - 1.6875), 3 * std::sqrt(1.6875 / 2000.0));
  MeanAccumulator size;
  for (const auto& j : tr.jumps) {
    EXPECT_GE(j.z, 0.25);
    size.add(j.z);
  }
  EXPECT_LE(std::abs(size.mean() - 0.5), 3 * size.stderr_mean());
}

TEST(Diffusion, DelayResidual) {
  Trajectory flat;
  for (int k = 0; k <= 1000; ++k) {
    flat.times.push_back(k * 1e-3);
    flat.states.push_back({0.4, 0.4});
  }
  EXPECT_LT(delay_residual(flat, plain(1, 2)), 1e-6);
  Trajectory single;
  single.times = {0.0};
  single.states = {{0.3, 0.9}};
  EXPECT_EQ(delay_residual(single, plain(1, 1)), 0.0);

  auto s = settings(1e-4, 5);
  std::vector<double> coarse, fine;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const double r = delay_residual(integrate(plain(1, 1), {0.3, 0.7}, s, seed), plain(1, 1));
    EXPECT_LE(r, 5 * 1e-4 * 1 * 5);
    coarse.push_back(r);
  }
  s.dt = 5e-5;
  for (std::uint64_t seed = 0; seed < 10; ++seed)
    fine.push_back(delay_residual(integrate(plain(1, 1), {0.3, 0.7}, s, seed), plain(1, 1)));
  std::sort(coarse.begin(), coarse.end());
  std::sort(fine.begin(), fine.end());
  EXPECT_LE(fine[5], 0.5 * coarse[5]);

  ModelParams mut = plain(1, 1);
  mut.u1 = 0.1;
  EXPECT_THROW(delay_residual(flat, mut), std::domain_error);
  ModelParams jumpy = plain(1, 1);
  jumpy.lambda_da = SwitchingMeasure::atom(0.5, 1);
  EXPECT_THROW(delay_residual(flat, jumpy), std::domain_error);
}

TEST(Diffusion, MartingaleExamples) {
  auto s = settings(1e-3, 10);
  s.checkpoints = {1, 5, 10};
  for (const auto& e : martingale_drift(plain(1, 1), {0, 0}, s, 50, 7)) EXPECT_EQ(e.value, 0.0);
  for (const auto& e : martingale_drift(plain(1, 2), {1, 1}, s, 50, 7)) EXPECT_EQ(e.value, 3.0);
  for (const auto& e : martingale_drift(plain(1, 1), {0.3, 0.7}, s, 3000, 7))
    EXPECT_LE(std::abs(e.value - 1.0), 3 * e.stderr_mean);
}

TEST(Diffusion, DualityLhsExamples) {
  const auto p = plain(1, 1);
  const auto zero = duality_lhs(p, 0.3, 0.6, 2, 1, 0.0, 10, 1);
  EXPECT_DOUBLE_EQ(zero.value, 0.09 * 0.6);
  IntegratorSettings s;
  s.dt = 1e-3;
  const auto one = duality_lhs(p, 1, 1, 2, 2, 0.7, 100, 1, s);
  EXPECT_EQ(one.value, 1.0);
  EXPECT_EQ(one.stderr_mean, 0.0);
  const auto e = duality_lhs(p, 0.4, 0.8, 1, 0, std::log(2.0) / 2, 20000, 2, s);
  EXPECT_LE(std::abs(e.value - 0.5), 3 * e.stderr_mean + 0.005);
  EXPECT_THROW(duality_lhs(p, 0.4, 0.8, 0, 0, 1.0, 10, 1), std::domain_error);
}

TEST(Diffusion, DualityAgainstExactRhs) {
  const auto p = plain(1, 1);
  IntegratorSettings s;
  s.dt = 1e-3;
  s.horizon = 0.5;
  s.checkpoints = {0.5};
  const std::vector<BlockCountState> exps{{1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}, {2, 2}};
  const auto lhs = duality_lhs_grid(p, {0.2, 0.8}, exps, s, 5000, 3);
  for (std::size_t k = 0; k < exps.size(); ++k) {
    const double rhs = duality_rhs(exps[k].n, exps[k].m, 0.2, 0.8, p, 0.5, DualityMethod::exact()).value;
    EXPECT_LE(std::abs(lhs[0][k].value - rhs), 3 * lhs[0][k].stderr_mean + 0.01) << k;
  }
}

TEST(Diffusion, FixationLaw) {
  // Clamping keeps X of order dt near 0, so (0,0) is detected at a tolerance of 10 dt.
  auto s = settings(1e-3, 200);
  s.boundary_tol = 1e-2;
  const auto f = diffusion_fixation(plain(1, 1), {0.3, 0.7}, s, 2000, 8);
  EXPECT_EQ(f.unfixed, 0u);
  EXPECT_EQ(f.hit_00 + f.hit_11, f.reps);
  EXPECT_LE(std::abs(f.frequency() - 0.5), 3 * f.stderr_frequency() + 0.01);
}

TEST(Diffusion, AlleleRelabelingSymmetry) {
  ModelParams p = plain(1.5, 0.8);
  p.u1 = 0.3;
  p.u2 = 0.1;
  p.u1p = 0.2;
  p.u2p = 0.05;
  ModelParams q = p;
  std::swap(q.u1, q.u2);
  std::swap(q.u1p, q.u2p);
  auto s = settings(1e-3, 0.5);
  s.record_every = 0;
  std::vector<double> xa, xb, ya, yb;
  for (std::size_t r = 0; r < 5000; ++r) {
    Rng ra = make_stream(9, experiment_id("sym-a"), r);
    Rng rb = make_stream(9, experiment_id("sym-b"), r);
    const auto a = integrate(p, {0.3, 0.6}, s, ra).final_state();
    const auto b = integrate(q, {0.7, 0.4}, s, rb).final_state();
    xa.push_back(a.x);
    ya.push_back(a.y);
    xb.push_back(1 - b.x);
    yb.push_back(1 - b.y);
  }
  // Two-sample KS critical value at level 0.001 is 1.95 sqrt(2/n).
  const double crit = 1.95 * std::sqrt(2.0 / 5000);
  EXPECT_LT(ks_distance(xa, xb), crit);
  EXPECT_LT(ks_distance(ya, yb), crit);
}

TEST(Diffusion, StrongOrderWithSharedNoise) {
  const auto p = plain(1, 1);
  const double dt = 0.01, T = 1.0;
  const auto fine_steps = static_cast<std::size_t>(std::lround(4 * T / dt));
  MeanAccumulator d1, d2;
  for (std::size_t r = 0; r < 500; ++r) {
    Rng rng = make_stream(10, experiment_id("strong-order"), r);
    std::normal_distribution<double> normal;
    std::vector<double> w4(fine_steps);
    for (auto& w : w4) w = std::sqrt(dt / 4) * normal(rng);
    std::vector<double> w2(fine_steps / 2), w1(fine_steps / 4);
    for (std::size_t k = 0; k < w2.size(); ++k) w2[k] = w4[2 * k] + w4[2 * k + 1];
    for (std::size_t k = 0; k < w1.size(); ++k) w1[k] = w2[2 * k] + w2[2 * k + 1];
    auto s = settings(dt, T);
    s.record_every = 0;
    const auto a = integrate_driven(p, {0.4, 0.6}, s, w1).final_state();
    s.dt = dt / 2;
    const auto b = integrate_driven(p, {0.4, 0.6}, s, w2).final_state();
    s.dt = dt / 4;
    const auto c = integrate_driven(p, {0.4, 0.6}, s, w4).final_state();
    d1.add(std::abs(a.x - b.x));
    d2.add(std::abs(b.x - c.x));
  }
  EXPECT_LT(d2.mean(), d1.mean());
}

TEST(Diffusion, BoundaryHittingWithoutMutation) {
  auto s = settings(1e-3, 50);
  const auto [h, h2] = boundary_hitting_stats(plain(1, 1), {0.05, 0.05}, s, 200, 11);
  EXPECT_GT(h.x_hits_0(), 0.0);
  EXPECT_GT(h2.x_hits_0(), 0.0);
  EXPECT_EQ(h.y_hits_0(), 0.0);
  EXPECT_EQ(h.y_hits_1(), 0.0);
  EXPECT_DOUBLE_EQ(h2.dt, 5e-4);
  EXPECT_THROW(boundary_hitting_stats(plain(1, 1), {0.0, 0.5}, s, 10, 1), std::domain_error);
}
