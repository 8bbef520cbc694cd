#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "seedbank/blockcount.hpp"
#include "seedbank/coalescent.hpp"
#include "seedbank/config.hpp"
#include "seedbank/diffusion.hpp"
#include "seedbank/experiments.hpp"
#include "seedbank/forward_wf.hpp"
#include "seedbank/mutation_stats.hpp"

namespace seedbank {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
};

inline std::string format_result(const CriterionResult& r) {
  return std::string(r.pass ? "PASS" : "FAIL") + " " + std::to_string(r.id) + " " + r.name + ": " + r.detail;
}

namespace acceptance {

inline std::string f(double v) { return format_double(v); }

inline ModelParams params(double c, double K) {
  ModelParams p;
  p.c = c;
  p.K = K;
  return p;
}

inline double choose(long n, long k) {
  double r = 1.0;
  for (long i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

inline CriterionResult rate_table(std::uint64_t, unsigned) {
  CriterionResult r{1, "rate-table exactness", true, ""};
  const auto spont = bc_transition_rates({3, 2}, params(2, 0.5));
  const std::vector<BlockCountTransition> expect{{{2, 2}, 3.0}, {{2, 3}, 6.0}, {{4, 1}, 2.0}};
  const bool exact = spont == expect;

  // Atom (z, w): k of b lines flip at rate C(b,k) w z^(k-1) (1-z)^(b-k), plus c b for k = 1.
  auto p = params(2, 0.5);
  p.lambda_ad = SwitchingMeasure::atom(0.5, 0.4);
  std::map<BlockCountState, double> oracle{{{2, 0}, 3.0}};
  for (long k = 1; k <= 3; ++k)
    oracle[{3 - k, k}] = choose(3, k) * 0.4 * std::pow(0.5, k - 1) * std::pow(0.5, 3 - k) + (k == 1 ? 2.0 * 3 : 0.0);
  const auto got = bc_transition_rates({3, 0}, p);
  double worst = got.size() == oracle.size() ? 0.0 : 1.0;
  for (const auto& t : got) {
    const auto it = oracle.find(t.target);
    worst = std::max(worst, it == oracle.end() ? 1.0 : std::abs(it->second - t.rate));
  }
  r.pass = exact && worst <= 1e-12;
  r.detail = std::string("spontaneous table ") + (exact ? "exact" : "differs") + ", atom table max error " + f(worst);
  return r;
}

inline CriterionResult first_step(std::uint64_t seed, unsigned workers) {
  CriterionResult r{2, "first-step oracle", true, ""};
  const auto p = params(1, 1);
  const double exact = expected_tmrca_first_step({2, 0}, p);
  const RateKernel kernel(p, 2);
  const auto times = run_replicates(100000, workers, [&](std::size_t i) {
    Rng rng = make_stream(seed, experiment_id("acceptance-2"), i);
    return blockcount_absorption_time({2, 0}, kernel, rng);
  });
  const auto acc = accumulate(times, [](double v) { return v; });
  const double rel = std::abs(acc.mean() - 4.0) / 4.0;
  r.pass = std::abs(exact - 4.0) <= 1e-10 && rel <= 0.02;
  r.detail = "first-step " + f(exact) + ", MC mean " + f(acc.mean()) + " +- " + f(acc.stderr_mean()) +
             " (relative error " + f(rel) + ")";
  return r;
}

inline CriterionResult duality(int id, const ModelParams& p, std::size_t rhs_reps, std::uint64_t seed,
                               unsigned workers) {
  CriterionResult r{id, id == 3 ? "duality, spontaneous switching" : "duality, simultaneous switching", true, ""};
  const auto rows = duality_table(p, 2, {0.2, 0.8}, {0.2, 0.8}, {0.1, 0.5, 2.0}, 10000, 1e-3, 1e-3, rhs_reps, 0.01,
                                  seed, workers);
  std::size_t inside = 0;
  double worst = 0.0;
  for (const auto& row : rows) {
    inside += row.within();
    worst = std::max(worst, std::abs(row.diff()) / row.tolerance);
  }
  r.pass = inside == rows.size();
  r.detail = std::to_string(inside) + "/" + std::to_string(rows.size()) +
             " rows within 3 SE + 0.01, largest |diff|/tolerance " + f(worst);
  return r;
}

inline CriterionResult fixation(std::uint64_t seed, unsigned workers) {
  CriterionResult r{5, "fixation law", true, ""};
  struct Case {
    double x, y, K;
  };
  for (const Case c : {Case{0.3, 0.7, 1}, Case{0.3, 0.7, 2}, Case{0.5, 0.5, 0.5}}) {
    const double target = (c.y + c.x * c.K) / (1 + c.K);
    IntegratorSettings set;
    set.dt = 1e-3;
    set.horizon = 200;
    set.boundary_tol = 1e-2;
    const auto d = diffusion_fixation(params(1, c.K), {c.x, c.y}, set, 10000, seed, workers);
    const bool d_ok = std::abs(d.frequency() - target) <= 3 * d.stderr_frequency() + 0.01;
    WFConfig wf;
    wf.N = 100;
    wf.K = c.K;
    wf.c = 1;
    const auto w = wf_fixation(wf, c.x, c.y, 10000000, 10000, seed, workers);
    const bool w_ok = std::abs(w.frequency() - target) <= 3 * w.stderr_frequency() + 0.02;
    r.pass = r.pass && d_ok && w_ok;
    r.detail += (r.detail.empty() ? "" : "; ") + std::string("(") + f(c.x) + "," + f(c.y) + ",K=" + f(c.K) +
                ") target " + f(target) + " diffusion " + f(d.frequency()) + " [" + std::to_string(d.unfixed) +
                " unfixed] WF " + f(w.frequency()) + " [" + std::to_string(w.unfixed) + " unfixed]";
  }
  return r;
}

inline CriterionResult delay(std::uint64_t seed, unsigned workers) {
  CriterionResult r{6, "delay representation", true, ""};
  const auto p = params(1, 1);
  auto residuals = [&](double dt) {
    IntegratorSettings set;
    set.dt = dt;
    set.horizon = 5;
    auto v = run_replicates(100, workers, [&](std::size_t i) {
      Rng rng = make_stream(seed, experiment_id("acceptance-6"), i);
      return delay_residual(integrate(p, {0.3, 0.7}, set, rng), p);
    });
    std::sort(v.begin(), v.end());
    return v;
  };
  const auto coarse = residuals(1e-4);
  const auto fine = residuals(5e-5);
  const double med_c = 0.5 * (coarse[49] + coarse[50]);
  const double med_f = 0.5 * (fine[49] + fine[50]);
  r.pass = coarse.back() <= 0.01 && med_f <= 0.5 * med_c;
  r.detail = "max residual " + f(coarse.back()) + ", median " + f(med_c) + " at dt=1e-4 and " + f(med_f) +
             " at dt=5e-5 (ratio " + f(med_c / med_f) + ")";
  return r;
}

inline CriterionResult martingale(std::uint64_t seed, unsigned workers) {
  CriterionResult r{7, "martingale", true, ""};
  IntegratorSettings set;
  set.dt = 1e-3;
  set.horizon = 10;
  set.checkpoints = {1, 5, 10};
  // K = 1 puts K x0 + y0 at the symmetric midpoint; K = 2 does not.
  for (const double K : {1.0, 2.0}) {
    const double target = K * 0.3 + 0.7;
    const auto est = martingale_drift(params(1, K), {0.3, 0.7}, set, 10000, seed, workers);
    r.detail += std::string(K == 1.0 ? "" : " | ") + "K=" + f(K) + " target " + f(target) + ":";
    for (std::size_t k = 0; k < est.size(); ++k) {
      const double z = std::abs(est[k].value - target) / est[k].stderr_mean;
      r.pass = r.pass && z <= 3.0;
      r.detail += " t=" + f(set.checkpoints[k]) + " mean " + f(est[k].value) + " (" + f(z) + " SE)";
    }
  }
  return r;
}

inline CriterionResult tmrca_scaling(std::uint64_t seed, unsigned workers) {
  CriterionResult r{8, "T_MRCA log log scaling", true, ""};
  const auto rows = tmrca_loglog_scan(params(1, 1), {100, 1000, 10000}, 1000, seed, workers);
  double lo = rows[0].ratio, hi = rows[0].ratio;
  bool increasing = true;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (k) increasing = increasing && rows[k].mean > rows[k - 1].mean;
    lo = std::min(lo, rows[k].ratio);
    hi = std::max(hi, rows[k].ratio);
    r.detail += (k ? "; " : "") + std::string("n=") + std::to_string(rows[k].n) + " mean " + f(rows[k].mean) +
                " mean/loglog " + f(rows[k].ratio);
  }
  r.pass = increasing && hi / lo < 2.0;
  return r;
}

inline CriterionResult coming_down(std::uint64_t seed, unsigned workers) {
  CriterionResult r{9, "coming-down proxy", true, ""};
  auto p = params(0, 1);
  p.lambda_ad = SwitchingMeasure::atom(0.5, 1);
  const std::vector<long> ns{100, 1000, 10000};
  const auto a = coming_down_scan(p, ns, 0.05, 1000, seed, workers);
  p.c = 0.5;
  const auto b = coming_down_scan(p, ns, 0.05, 1000, seed, workers);
  const bool stable = a[2].ratio >= 0.8 && a[2].ratio <= 1.25;
  const bool growing = b[1].mean > b[0].mean && b[2].mean > b[1].mean;
  r.pass = stable && growing;
  r.detail = "c=0 means " + f(a[0].mean) + ", " + f(a[1].mean) + ", " + f(a[2].mean) + " (last ratio " +
             f(a[2].ratio) + "); c=0.5 means " + f(b[0].mean) + ", " + f(b[1].mean) + ", " + f(b[2].mean);
  return r;
}

inline CriterionResult segregating_sites_oracle(std::uint64_t seed, unsigned workers) {
  CriterionResult r{10, "mutation / SFS oracle", true, ""};
  const auto p = params(1, 1);
  const double u = 1.0, up = 0.5;
  const auto sites = run_replicates(100000, workers, [&](std::size_t i) {
    Rng rng = make_stream(seed, experiment_id("acceptance-10"), i);
    const auto g = simulate_coalescent(4, 0, p, StopRule::mrca(), rng);
    return segregating_sites(sfs(g, drop_mutations(g, u, up, rng)));
  });
  const auto acc = accumulate(sites, [](long v) { return v; });
  const auto [la, ld] = expected_branch_lengths_first_step({4, 0}, p);
  const double oracle = 0.5 * u * la + 0.5 * up * ld;
  const double z = std::abs(acc.mean() - oracle) / acc.stderr_mean();
  r.pass = z <= 3.0;
  r.detail = "MC " + f(acc.mean()) + " +- " + f(acc.stderr_mean()) + ", oracle " + f(oracle) + " (" + f(z) + " SE)";
  return r;
}

/// Average pairwise differences from per-leaf mutation incidence.
inline double pairwise_differences(const Genealogy& g, const MutationSet& muts) {
  const auto rp = replay(g);
  const long n = g.initial.sample_size();
  std::vector<std::vector<char>> carries(static_cast<std::size_t>(n) + 1,
                                         std::vector<char>(muts.mutations.size(), 0));
  for (std::size_t k = 0; k < muts.mutations.size(); ++k)
    for (int leaf : rp.leaves[static_cast<std::size_t>(muts.mutations[k].block)])
      carries[static_cast<std::size_t>(leaf)][k] = 1;
  double diffs = 0.0;
  for (long a = 1; a <= n; ++a)
    for (long b = a + 1; b <= n; ++b)
      for (std::size_t k = 0; k < muts.mutations.size(); ++k)
        diffs += carries[static_cast<std::size_t>(a)][k] != carries[static_cast<std::size_t>(b)][k];
  return diffs / (0.5 * static_cast<double>(n * (n - 1)));
}

inline CriterionResult statistics(std::uint64_t seed, unsigned workers) {
  CriterionResult r{11, "statistics", true, ""};
  const SiteFrequencySpectrum zero(4, {0, 0, 0}), ext(4, {3, 0, 0}), deep(4, {0, 0, 3}), pair(2, {5});
  const double hand_err = std::max({std::abs(fay_wu_h(zero)), std::abs(fay_wu_h(ext) - 1.0),
                                    std::abs(fay_wu_h(deep) + 3.0), std::abs(fu_li_d_numerator(zero)),
                                    std::abs(fu_li_d_numerator(pair)), std::abs(fu_li_d_numerator(ext) + 2.5)});
  auto p = params(1, 1);
  p.lambda_ad = SwitchingMeasure::atom(0.5, 0.5);
  p.lambda_da = SwitchingMeasure::atom(0.3, 0.4);
  const auto gaps = run_replicates(1000, workers, [&](std::size_t i) {
    Rng rng = make_stream(seed, experiment_id("acceptance-11"), i);
    const long n = 2 + static_cast<long>(i % 6), m = static_cast<long>(i % 3);
    const auto g = simulate_coalescent(n, m, p, StopRule::mrca(), rng);
    const auto muts = drop_mutations(g, 3.0, 1.0, rng);
    return std::abs(theta_pi(sfs(g, muts)) - pairwise_differences(g, muts));
  });
  const double worst = *std::max_element(gaps.begin(), gaps.end());
  r.pass = hand_err <= 1e-12 && worst <= 1e-9;
  r.detail = "hand examples max error " + f(hand_err) + ", theta_pi vs pairwise max gap " + f(worst) +
             " over 1000 genealogies";
  return r;
}

inline CriterionResult boundary(std::uint64_t seed, unsigned workers) {
  CriterionResult r{12, "boundary classification proxy", true, ""};
  IntegratorSettings set;
  set.dt = 1e-3;
  set.horizon = 50;
  auto p = params(1, 1);
  p.u2 = 0.6;
  const auto [h, h2] = boundary_hitting_stats(p, {0.05, 0.05}, set, 1000, seed, workers);
  const auto [z, z2] = boundary_hitting_stats(params(1, 1), {0.05, 0.05}, set, 1000, seed, workers);
  (void)z2;
  const bool halves = h2.x_hits_0() <= 0.5 * h.x_hits_0();
  const bool y_small = h.y_hits_0() < 1e-3 && h.y_hits_1() < 1e-3;
  const bool x_hits = z.x_hits_0() > 0.0 && z.x_hits_1() > 0.0;
  r.pass = halves && y_small && x_hits;
  r.detail = "u2=0.6 X-hits-0 " + f(h.x_hits_0()) + " at dt=1e-3, " + f(h2.x_hits_0()) + " at dt=5e-4" +
             (halves ? "" : " (not halved)") + "; Y-hits " + f(h.y_hits_0()) + "/" + f(h.y_hits_1()) +
             "; no mutation X-hits " + f(z.x_hits_0()) + "/" + f(z.x_hits_1());
  return r;
}

inline std::vector<std::function<CriterionResult(std::uint64_t, unsigned)>> criteria() {
  auto spont = params(1, 1);
  auto sim = params(1, 1);
  sim.lambda_ad = SwitchingMeasure::atom(0.5, 0.5);
  sim.lambda_da = SwitchingMeasure::atom(0.5, 0.5);
  return {rate_table,
          first_step,
          [spont](std::uint64_t s, unsigned w) { return duality(3, spont, 0, s, w); },
          [sim](std::uint64_t s, unsigned w) { return duality(4, sim, 100000, s, w); },
          fixation,
          delay,
          martingale,
          tmrca_scaling,
          coming_down,
          segregating_sites_oracle,
          statistics,
          boundary};
}

inline std::uint64_t digest(const std::vector<CriterionResult>& results) {
  std::string all;
  for (const auto& r : results) all += format_result(r) + "\n";
  return experiment_id(all);
}

}  // namespace acceptance

/// Runs criteria 1-12 with `workers`, printing one line each, then reruns
/// them with `alt_workers` and compares every reported number (criterion 13).
inline std::vector<CriterionResult> run_acceptance(std::uint64_t seed, unsigned workers, unsigned alt_workers,
                                                   std::ostream& out) {
  std::vector<CriterionResult> first, second;
  for (const auto& c : acceptance::criteria()) {
    first.push_back(c(seed, workers));
    out << format_result(first.back()) << std::endl;
  }
  for (const auto& c : acceptance::criteria()) second.push_back(c(seed, alt_workers));
  const auto d1 = acceptance::digest(first), d2 = acceptance::digest(second);
  CriterionResult det{13, "determinism", d1 == d2,
                      "digest " + std::to_string(d1) + " with " + std::to_string(workers) + " worker(s), " +
                          std::to_string(d2) + " on rerun with " + std::to_string(alt_workers)};
  out << format_result(det) << std::endl;
  auto all = first;
  all.push_back(det);
  return all;
}

}  // namespace seedbank
