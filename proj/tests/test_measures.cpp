#include <cmath>

#include <gtest/gtest.h>

#include "seedbank/measures.hpp"

using namespace seedbank;

namespace {

// Composite Simpson on [a, b]; integrands here are smooth on the interval.
template <class F>
double simpson(F f, double a, double b, int n = 20000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

double beta_density(double a, double b, double z) {
  return std::pow(z, a - 1) * std::pow(1 - z, b - 1) / std::beta(a, b);
}

double choose(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

SwitchingMeasure mixed() {
  return SwitchingMeasure({{0.5, 0.4}, {0.2, 0.3}}, {{2.0, 2.0, 0.6}, {3.0, 1.5, 0.25}});
}

}  // namespace

TEST(Measures, TotalMass) {
  EXPECT_EQ(total_mass(SwitchingMeasure{}), 0.0);
  EXPECT_DOUBLE_EQ(total_mass(SwitchingMeasure::atom(0.5, 0.4)), 0.4);
  EXPECT_DOUBLE_EQ(total_mass(SwitchingMeasure({{0.5, 0.4}}, {{2, 2, 0.6}})), 1.0);
}

TEST(Measures, RejectsInvalidParts) {
  EXPECT_THROW(SwitchingMeasure::atom(0.0, 1.0), std::domain_error);
  EXPECT_THROW(SwitchingMeasure::atom(1.5, 1.0), std::domain_error);
  EXPECT_THROW(SwitchingMeasure::atom(0.5, 0.0), std::domain_error);
  EXPECT_THROW(SwitchingMeasure::beta(0.0, 1.0, 1.0), std::domain_error);
  EXPECT_THROW(SwitchingMeasure::beta(1.0, 1.0, -1.0), std::domain_error);
  EXPECT_NO_THROW(SwitchingMeasure::atom(1.0, 1.0));
}

TEST(Measures, GroupSwitchRateExamples) {
  EXPECT_EQ(group_switch_rate(SwitchingMeasure{}, 4, 2), 0.0);
  EXPECT_NEAR(group_switch_rate(SwitchingMeasure::atom(0.5, 0.4), 3, 2), 0.3, 1e-14);
  EXPECT_NEAR(group_switch_rate(SwitchingMeasure::beta(2, 2, 1.0), 2, 1), 1.0, 1e-13);
  const double quad = 2.0 * simpson([](double z) { return (1 - z) * beta_density(2, 2, z); }, 0.0, 1.0);
  EXPECT_NEAR(quad, 1.0, 1e-10);
  EXPECT_THROW(group_switch_rate(SwitchingMeasure{}, 3, 0), std::domain_error);
  EXPECT_THROW(group_switch_rate(SwitchingMeasure{}, 3, 4), std::domain_error);
}

TEST(Measures, AtomRatesMatchBruteForce) {
  const auto m = SwitchingMeasure({{0.5, 0.4}, {0.2, 0.3}, {1.0, 0.7}}, {});
  for (int b = 1; b <= 12; ++b) {
    for (int k = 1; k <= b; ++k) {
      double expect = 0.0;
      for (const auto& a : m.atoms()) expect += a.weight * std::pow(a.z, k - 1) * std::pow(1 - a.z, b - k);
      expect *= choose(b, k);
      EXPECT_NEAR(group_switch_rate(m, b, k), expect, 1e-13 * std::max(1.0, expect)) << b << " " << k;
    }
  }
}

TEST(Measures, BetaRatesMatchQuadrature) {
  const auto m = SwitchingMeasure::beta(3.0, 1.5, 0.25);
  for (int b : {1, 3, 7}) {
    for (int k = 1; k <= b; ++k) {
      const double expect = 0.25 * choose(b, k) *
                            simpson([&](double z) { return std::pow(z, k - 1) * std::pow(1 - z, b - k) * beta_density(3.0, 1.5, z); }, 0.0, 1.0, 200000);
      EXPECT_NEAR(group_switch_rate(m, b, k), expect, 1e-6);
    }
  }
}

TEST(Measures, RatesSumToTotal) {
  const auto m = mixed();
  for (int b : {1, 2, 5, 20, 60}) {
    double sum = 0.0;
    for (int k = 1; k <= b; ++k) sum += group_switch_rate(m, b, k);
    double expect = 0.0;
    for (const auto& a : m.atoms()) expect += a.weight * (1 - std::pow(1 - a.z, b)) / a.z;
    for (const auto& c : m.components())
      expect += c.mass * simpson([&](double z) { return z == 0.0 ? 0.0 : (1 - std::pow(1 - z, b)) / z * beta_density(c.alpha, c.beta, z); }, 0.0, 1.0, 200000);  // both densities vanish at 0
    EXPECT_NEAR(sum, expect, 1e-6) << b;
    EXPECT_NEAR(total_switch_rate(m, b), sum, 1e-12 * std::max(1.0, sum)) << b;
    const SwitchRateTable table(m, 60);
    EXPECT_NEAR(table(b), sum, 1e-12 * std::max(1.0, sum));
  }
}

TEST(Measures, RatesScaleWithMass) {
  const auto m = mixed();
  const auto m2 = m.scaled(2.0);
  for (int b = 1; b <= 8; ++b)
    for (int k = 1; k <= b; ++k) {
      EXPECT_GE(group_switch_rate(m, b, k), 0.0);
      EXPECT_NEAR(group_switch_rate(m2, b, k), 2.0 * group_switch_rate(m, b, k), 1e-14);
    }
}

TEST(Measures, JumpActivityAbove) {
  EXPECT_EQ(jump_activity_above(SwitchingMeasure{}, 0.3), 0.0);
  EXPECT_NEAR(jump_activity_above(SwitchingMeasure::atom(0.5, 0.4), 0.1), 0.8, 1e-15);
  EXPECT_NEAR(jump_activity_above(SwitchingMeasure::beta(2, 2, 1.0), 0.25), 1.6875, 1e-10);
  const double quad = simpson([](double z) { return 6.0 * (1 - z); }, 0.25, 1.0);
  EXPECT_NEAR(quad, 1.6875, 1e-12);
}

TEST(Measures, SmallJumpMass) {
  EXPECT_EQ(small_jump_mass(SwitchingMeasure{}, 0.3), 0.0);
  EXPECT_DOUBLE_EQ(small_jump_mass(SwitchingMeasure::atom(0.5, 0.4), 0.6), 0.4);
  EXPECT_EQ(small_jump_mass(SwitchingMeasure::atom(0.5, 0.4), 0.1), 0.0);
}

TEST(Measures, CutoffMonotonicityAndMassSplit) {
  const auto m = mixed();
  double prev_act = jump_activity_above(m, 0.01), prev_small = small_jump_mass(m, 0.01);
  for (double eps = 0.02; eps < 0.99; eps += 0.07) {
    const double act = jump_activity_above(m, eps), small = small_jump_mass(m, eps);
    EXPECT_LE(act, prev_act + 1e-12);
    EXPECT_GE(small, prev_small - 1e-12);
    prev_act = act;
    prev_small = small;
    // z * z^-1 m(dz) over [eps, 1] plus the mass below eps is the total mass.
    double above = 0.0;
    for (const auto& a : m.atoms())
      if (a.z >= eps) above += a.weight;
    for (const auto& c : m.components())
      above += c.mass * simpson([&](double z) { return beta_density(c.alpha, c.beta, z); }, eps, 1.0);
    EXPECT_NEAR(above + small, total_mass(m), 1e-6);  // Simpson on a sqrt endpoint
  }
}

TEST(Measures, NegLogMoment) {
  EXPECT_NEAR(neg_log_moment(SwitchingMeasure::atom(1.0, 1.0)), 0.0, 1e-15);
  EXPECT_NEAR(neg_log_moment(SwitchingMeasure::atom(0.5, 1.0)), std::log(2.0), 1e-15);
  EXPECT_NEAR(neg_log_moment(SwitchingMeasure::beta(1, 1, 1.0)), 1.0, 1e-12);
  // -log z integrated against the uniform density, away from the log singularity.
  const double quad = simpson([](double z) { return -std::log(z); }, 1e-12, 1.0, 2000000);
  EXPECT_NEAR(quad, 1.0, 1e-4);
  EXPECT_THROW(neg_log_moment(SwitchingMeasure{}), std::domain_error);
}

TEST(Measures, ModelParamsValidation) {
  ModelParams p;
  EXPECT_NO_THROW(p.validate());
  p.K = 0.0;
  EXPECT_THROW(p.validate(), std::domain_error);
  p.K = 1.0;
  p.c = -0.1;
  EXPECT_THROW(p.validate(), std::domain_error);
}

TEST(Measures, FlipSizeSelectionFollowsRates) {
  const auto m = mixed();
  const int b = 6;
  const double extra = 0.9;
  double total = extra;
  for (int k = 1; k <= b; ++k) total += group_switch_rate(m, b, k);
  std::vector<double> mass(b + 1, 0.0);
  const int grid = 200000;
  for (int i = 0; i < grid; ++i) mass[select_flip_size(m, b, extra, (i + 0.5) / grid * total)] += 1.0 / grid;
  for (int k = 1; k <= b; ++k) {
    const double expect = (group_switch_rate(m, b, k) + (k == 1 ? extra : 0.0)) / total;
    EXPECT_NEAR(mass[k], expect, 2.0 / grid);
  }
}
