#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "seedbank/blockcount.hpp"

using namespace seedbank;

namespace {

ModelParams spontaneous(double c, double K) {
  ModelParams p;
  p.c = c;
  p.K = K;
  return p;
}

std::map<std::pair<long, long>, double> as_map(const std::vector<BlockCountTransition>& t) {
  std::map<std::pair<long, long>, double> out;
  for (const auto& tr : t) out[{tr.target.n, tr.target.m}] += tr.rate;
  return out;
}

}  // namespace

TEST(BlockCount, RateTableSpontaneous) {
  const auto rates = as_map(bc_transition_rates({3, 2}, spontaneous(2.0, 0.5)));
  const std::map<std::pair<long, long>, double> expect{{{2, 2}, 3.0}, {{2, 3}, 6.0}, {{4, 1}, 2.0}};
  EXPECT_EQ(rates, expect);
}

TEST(BlockCount, RateTableAbsorbed) {
  EXPECT_TRUE(bc_transition_rates({1, 0}, spontaneous(0.0, 1.0)).empty());
}

TEST(BlockCount, RateTableWithAtom) {
  auto p = spontaneous(0.0, 1.0);
  p.lambda_ad = SwitchingMeasure::atom(0.5, 0.4);
  const auto rates = as_map(bc_transition_rates({3, 0}, p));
  ASSERT_EQ(rates.size(), 4u);
  EXPECT_NEAR(rates.at({2, 0}), 3.0, 1e-12);
  EXPECT_NEAR(rates.at({2, 1}), 0.3, 1e-12);
  EXPECT_NEAR(rates.at({1, 2}), 0.3, 1e-12);
  EXPECT_NEAR(rates.at({0, 3}), 0.1, 1e-12);
  // The flips add up to 0.8 (1 - 0.5^3).
  EXPECT_NEAR(rates.at({2, 1}) + rates.at({1, 2}) + rates.at({0, 3}), 0.8 * (1 - 0.125), 1e-12);
}

TEST(BlockCount, FirstStepSmallCases) {
  EXPECT_EQ(expected_tmrca_first_step({1, 0}, spontaneous(1, 1)), 0.0);
  EXPECT_NEAR(expected_tmrca_first_step({2, 0}, spontaneous(0, 1)), 1.0, 1e-12);
  EXPECT_NEAR(expected_tmrca_first_step({2, 0}, spontaneous(1, 1)), 4.0, 1e-10);
  const auto [la0, ld0] = expected_branch_lengths_first_step({1, 0}, spontaneous(1, 1));
  EXPECT_EQ(la0, 0.0);
  EXPECT_EQ(ld0, 0.0);
  const auto [la1, ld1] = expected_branch_lengths_first_step({2, 0}, spontaneous(0, 1));
  EXPECT_NEAR(la1, 2.0, 1e-12);
  EXPECT_NEAR(ld1, 0.0, 1e-12);
  // Reward systems on {(2,0), (1,1), (0,2)}:
  //   La20 = 2/3 + 2/3 La11, La11 = 1/2 + 1/2 La20 + 1/2 La02, La02 = La11      -> La20 = 4
  //   Ld20 = 2/3 Ld11,       Ld11 = 1/2 + 1/2 Ld20 + 1/2 Ld02, Ld02 = 1 + Ld11  -> Ld20 = 4
  const auto [la2, ld2] = expected_branch_lengths_first_step({2, 0}, spontaneous(1, 1));
  EXPECT_NEAR(la2, 4.0, 1e-10);
  EXPECT_NEAR(ld2, 4.0, 1e-10);
}

TEST(BlockCount, FirstStepKingman) {
  for (long n : {3L, 7L, 20L, 60L}) {
    double harmonic = 0.0;
    for (long i = 1; i < n; ++i) harmonic += 1.0 / static_cast<double>(i);
    EXPECT_NEAR(expected_tmrca_first_step({n, 0}, spontaneous(0, 1)), 2.0 * (1.0 - 1.0 / n), 1e-10);
    EXPECT_NEAR(expected_branch_lengths_first_step({n, 0}, spontaneous(0, 1)).first, 2.0 * harmonic, 1e-10);
  }
}

TEST(BlockCount, FirstStepTotalLengthIdentity) {
  // With two lines the total line count is 2 until the MRCA.
  auto p = spontaneous(0.7, 2.5);
  p.lambda_ad = SwitchingMeasure::atom(0.5, 0.5);
  p.lambda_da = SwitchingMeasure::beta(2, 3, 0.4);
  const auto r = first_step_analysis({1, 1}, p);
  EXPECT_NEAR(r.active_length + r.dormant_length, 2.0 * r.tmrca, 1e-10);
}

TEST(BlockCount, StrandedDormantLinesAreReported) {
  EXPECT_THROW(expected_tmrca_first_step({2, 1}, spontaneous(0, 1)), std::domain_error);
  auto p = spontaneous(0, 1);
  p.lambda_ad = SwitchingMeasure::atom(0.5, 0.4);
  EXPECT_THROW(expected_tmrca_first_step({3, 0}, p), std::domain_error);
  p.lambda_da = SwitchingMeasure::atom(1.0, 0.3);
  EXPECT_NO_THROW(expected_tmrca_first_step({3, 0}, p));
  Rng rng(1);
  const RateKernel k(spontaneous(0, 1), 3);
  EXPECT_THROW(blockcount_absorption_time({1, 2}, k, rng), std::domain_error);
}

TEST(BlockCount, SimulateTrivialAndMonotone) {
  const auto path = simulate_blockcount({1, 0}, spontaneous(1, 1), StopRule::mrca(), 7);
  EXPECT_EQ(path.states.size(), 1u);
  EXPECT_TRUE(path.reached_mrca);

  auto p = spontaneous(1.3, 0.6);
  p.lambda_ad = SwitchingMeasure::atom(0.4, 0.8);
  p.lambda_da = SwitchingMeasure::beta(1.5, 2.0, 0.5);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto pth = simulate_blockcount({6, 3}, p, StopRule::mrca(), seed);
    ASSERT_TRUE(pth.reached_mrca);
    EXPECT_EQ(pth.states.back().total(), 1);
    for (std::size_t i = 1; i < pth.states.size(); ++i) {
      const long d = pth.states[i - 1].total() - pth.states[i].total();
      EXPECT_TRUE(d == 0 || d == 1);
      if (d == 1) {
        EXPECT_EQ(pth.states[i].n, pth.states[i - 1].n - 1);
      }
      EXPECT_GT(pth.times[i], pth.times[i - 1]);
    }
  }
}

TEST(BlockCount, SimulationIsDeterministic) {
  auto p = spontaneous(1, 1);
  const auto a = simulate_blockcount({5, 2}, p, StopRule::mrca(), 42);
  const auto b = simulate_blockcount({5, 2}, p, StopRule::mrca(), 42);
  EXPECT_EQ(a.times, b.times);
  EXPECT_EQ(a.states, b.states);
}

TEST(BlockCount, HorizonStop) {
  const auto p = simulate_blockcount({30, 0}, spontaneous(1, 1), StopRule::until(0.01), 3);
  EXPECT_FALSE(p.reached_mrca);
  EXPECT_EQ(p.end_time, 0.01);
  EXPECT_GT(p.states.back().total(), 1);
}

TEST(BlockCount, MonteCarloMatchesFirstStep) {
  std::vector<ModelParams> sets{spontaneous(1, 1), spontaneous(0.5, 2)};
  sets.push_back(spontaneous(0.3, 1));
  sets.back().lambda_ad = SwitchingMeasure::atom(0.5, 0.5);
  sets.back().lambda_da = SwitchingMeasure::atom(0.5, 0.5);
  for (const auto& p : sets) {
    for (BlockCountState s : {BlockCountState{3, 0}, BlockCountState{2, 2}, BlockCountState{0, 4}}) {
      const RateKernel kernel(p, s.total());
      MeanAccumulator acc;
      for (std::size_t r = 0; r < 20000; ++r) {
        Rng rng = make_stream(99, experiment_id("bc-oracle"), r);
        acc.add(blockcount_absorption_time(s, kernel, rng));
      }
      const double oracle = expected_tmrca_first_step(s, p);
      EXPECT_LE(std::abs(acc.mean() - oracle), 3.0 * acc.stderr_mean()) << s.n << "," << s.m << " oracle " << oracle;
    }
  }
}

TEST(BlockCount, DualityRhsExamples) {
  const auto p = spontaneous(1, 1);
  EXPECT_DOUBLE_EQ(duality_rhs(2, 1, 0.3, 0.6, p, 0.0).value, 0.3 * 0.3 * 0.6);
  const double t = std::log(2.0) / 2.0;
  for (double x : {0.0, 0.4, 1.0})
    for (double y : {0.0, 0.8, 1.0}) EXPECT_NEAR(duality_rhs(1, 0, x, y, p, t).value, 0.75 * x + 0.25 * y, 1e-12);
  for (long n = 0; n <= 3; ++n)
    for (long m = 0; m <= 3; ++m)
      if (n + m >= 1) {
        EXPECT_NEAR(duality_rhs(n, m, 1.0, 1.0, p, 1.7).value, 1.0, 1e-12);
      }
}

TEST(BlockCount, DualityRhsLongTimeLimit) {
  for (double K : {0.5, 1.0, 2.0}) {
    const auto p = spontaneous(1, K);
    for (long n = 0; n <= 3; ++n)
      for (long m = 0; m <= 3; ++m) {
        if (n + m == 0) continue;
        const double v = duality_rhs(n, m, 0.3, 0.7, p, 400.0).value;
        EXPECT_NEAR(v, (0.7 + 0.3 * K) / (1 + K), 1e-6) << n << "," << m << " K=" << K;
      }
  }
}

TEST(BlockCount, TransientDistributionIsNormalized) {
  auto p = spontaneous(1.2, 0.8);
  p.lambda_ad = SwitchingMeasure::atom(0.5, 0.5);
  const auto d = transient_distribution({4, 2}, p, 0.9);
  double total = 0.0;
  for (double q : d.probabilities) {
    EXPECT_GE(q, -1e-15);
    total += q;
  }
  EXPECT_NEAR(total, 1.0, 1e-11);
  EXPECT_LE(d.truncated_mass, 1e-12);
}

TEST(BlockCount, DualityExactMatchesMonteCarlo) {
  auto p = spontaneous(1, 1);
  p.lambda_ad = SwitchingMeasure::atom(0.5, 0.5);
  p.lambda_da = SwitchingMeasure::atom(0.5, 0.5);
  for (auto [n, m] : {std::pair{2L, 1L}, std::pair{0L, 2L}}) {
    const double exact = duality_rhs(n, m, 0.2, 0.8, p, 0.5).value;
    const auto mc = duality_rhs(n, m, 0.2, 0.8, p, 0.5, DualityMethod::monte_carlo(40000, 5));
    EXPECT_LE(std::abs(exact - mc.value), 3.0 * mc.stderr_mean);
  }
}

TEST(BlockCount, TmrcaScanKingman) {
  const auto rows = tmrca_loglog_scan(spontaneous(0, 1), {16, 64}, 4000, 11);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_LE(std::abs(r.mean - 2.0 * (1.0 - 1.0 / r.n)), 3.0 * r.stderr_mean);
    EXPECT_NEAR(r.ratio, r.mean / std::log(std::log(static_cast<double>(r.n))), 1e-12);
  }
  EXPECT_THROW(tmrca_loglog_scan(spontaneous(1, 1), {10}, 10, 1), std::domain_error);
  const auto a = tmrca_loglog_scan(spontaneous(1, 1), {16}, 1, 5);
  const auto b = tmrca_loglog_scan(spontaneous(1, 1), {16}, 1, 5);
  EXPECT_EQ(a[0].mean, b[0].mean);
}

TEST(BlockCount, ComingDownScanAbsorbs) {
  const auto rows = coming_down_scan(spontaneous(1, 1), {5, 20}, 500.0, 200, 3);
  for (const auto& r : rows) EXPECT_NEAR(r.mean, 1.0, 1e-12);
  EXPECT_TRUE(std::isnan(rows[0].ratio));
  EXPECT_NEAR(rows[1].ratio, 1.0, 1e-12);
  EXPECT_THROW(coming_down_scan(spontaneous(1, 1), {5}, 0.0, 1, 1), std::domain_error);
}

TEST(BlockCount, DormantStartScan) {
  auto p = spontaneous(0, 1);
  const std::vector<long> ms{10, 100, 1000};
  const auto frozen = coming_down_scan_dormant(p, 0, ms, 1.0, 50, 2);
  for (std::size_t k = 0; k < ms.size(); ++k) EXPECT_EQ(frozen[k].mean, static_cast<double>(ms[k]));

  p.lambda_da = SwitchingMeasure::atom(1.0, 50.0);
  const auto rows = coming_down_scan_dormant(p, 0, ms, 1.0, 400, 2);
  for (const auto& r : rows) EXPECT_LT(r.mean, 4.0);
  EXPECT_GE(rows.back().ratio, 0.8);
  EXPECT_LE(rows.back().ratio, 1.25);
  EXPECT_THROW(coming_down_scan_dormant(p, 0, {0}, 1.0, 1, 1), std::domain_error);
}

TEST(BlockCount, ParallelReplicatesMatchSerial) {
  const auto p = spontaneous(1, 1);
  const auto a = sample_blockcount_states({4, 1}, p, {0.3, 1.0}, 500, 9, 1);
  const auto b = sample_blockcount_states({4, 1}, p, {0.3, 1.0}, 500, 9, 4);
  EXPECT_EQ(a, b);
}
