#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "seedbank/measures.hpp"
#include "seedbank/parallel.hpp"
#include "seedbank/random.hpp"

namespace seedbank {

enum class ExchangeMode { fixed, binomial };

/// Rare large switching events: F with probability r/N per generation (z from
/// mu), D with probability r_bar/N (z from mu_bar). mu and mu_bar are
/// normalized on use.
struct SimultaneousSwitching {
  double r = 0.0;
  double r_bar = 0.0;
  SwitchingMeasure mu;
  SwitchingMeasure mu_bar;
};

struct WFConfig {
  long N = 100;
  double K = 1.0;
  double c = 1.0;
  ExchangeMode exchange = ExchangeMode::fixed;
  std::optional<SimultaneousSwitching> switching;

  long M() const { return static_cast<long>(std::floor(static_cast<double>(N) / K)); }

  void validate() const {
    if (N < 1) throw std::domain_error("WF: N must be positive");
    if (!(K > 0.0) || !std::isfinite(K)) throw std::domain_error("WF: K must be positive");
    if (M() < 1) throw std::domain_error("WF: floor(N/K) must be at least 1");
    if (!(c >= 0.0) || !std::isfinite(c)) throw std::domain_error("WF: c must be nonnegative");
    if (exchange == ExchangeMode::fixed) {
      if (c != std::floor(c)) throw std::domain_error("WF: fixed exchange mode needs an integer c");
      if (c > static_cast<double>(std::min(N, M()))) throw std::domain_error("WF: fixed c must not exceed min(N, M)");
    } else if (c > static_cast<double>(N)) {
      throw std::domain_error("WF: binomial exchange needs c <= N");
    }
    if (switching) {
      const auto& s = *switching;
      if (!(s.r >= 0.0) || !(s.r_bar >= 0.0)) throw std::domain_error("WF: r and r_bar must be nonnegative");
      if ((s.r + s.r_bar) / static_cast<double>(N) > 1.0) throw std::domain_error("WF: (r + r_bar)/N must be at most 1");
      if (s.r > 0.0 && s.mu.is_zero()) throw std::domain_error("WF: r > 0 needs a nonzero mu");
      if (s.r_bar > 0.0 && s.mu_bar.is_zero()) throw std::domain_error("WF: r_bar > 0 needs a nonzero mu_bar");
    }
  }
};

/// Type-0 counts among the N active (i) and M dormant (j) individuals.
struct WFState {
  long i = 0;
  long j = 0;
  long generation = 0;
  friend bool operator==(const WFState&, const WFState&) = default;
};

struct WFCounters {
  long small_events = 0;
  long f_events = 0;
  long d_events = 0;
  long exchange_clamped = 0;  // binomial exchange count exceeded min(N, M)
  long f_capped = 0;          // round(zN) exceeded M
};

/// One generation of the spontaneous-switching model. The c* dormant
/// individuals that germinate are the ones whose slots are refilled by
/// active offspring.
inline WFState wf_step(const WFState& s, const WFConfig& cfg, Rng& rng, WFCounters* counters = nullptr) {
  const long N = cfg.N, M = cfg.M();
  long ex = cfg.exchange == ExchangeMode::fixed ? static_cast<long>(cfg.c)
                                                : binomial(rng, N, cfg.c / static_cast<double>(N));
  if (ex > std::min(N, M)) {
    ex = std::min(N, M);
    if (counters) ++counters->exchange_clamped;
  }
  const double p = static_cast<double>(s.i) / static_cast<double>(N);
  const long germinated = hypergeometric(rng, ex, s.j, M);
  WFState out;
  out.i = binomial(rng, N - ex, p) + germinated;
  out.j = s.j - germinated + binomial(rng, ex, p);
  out.generation = s.generation + 1;
  if (counters) ++counters->small_events;
  return out;
}

/// Draws z from a measure normalized to a probability.
inline double sample_z(const SwitchingMeasure& mu, Rng& rng) {
  double target = uniform01(rng) * total_mass(mu);
  for (const auto& a : mu.atoms()) {
    if (target < a.weight) return a.z;
    target -= a.weight;
  }
  const auto& comps = mu.components();
  for (std::size_t k = 0; k < comps.size(); ++k) {
    if (target < comps[k].mass || k + 1 == comps.size()) {
      const double g1 = std::gamma_distribution<double>(comps[k].alpha, 1.0)(rng);
      const double g2 = std::gamma_distribution<double>(comps[k].beta, 1.0)(rng);
      return g1 / (g1 + g2);
    }
    target -= comps[k].mass;
  }
  return mu.atoms().back().z;
}

/// One generation with rare simultaneous switching events F and D.
inline WFState wf_sim_step(const WFState& s, const WFConfig& cfg, Rng& rng, WFCounters* counters = nullptr) {
  if (!cfg.switching) throw std::domain_error("wf_sim_step: no simultaneous switching configured");
  const auto& sw = *cfg.switching;
  const long N = cfg.N, M = cfg.M();
  const double u = uniform01(rng) * static_cast<double>(N);
  const double p = static_cast<double>(s.i) / static_cast<double>(N);
  WFState out;
  out.generation = s.generation + 1;
  if (u < sw.r) {
    long f = std::lround(sample_z(sw.mu, rng) * static_cast<double>(N));
    if (f > M) {
      f = M;
      if (counters) ++counters->f_capped;
    }
    out.i = binomial(rng, N - f, p) + hypergeometric(rng, f, s.j, M);
    out.j = s.j;
    if (counters) ++counters->f_events;
  } else if (u < sw.r + sw.r_bar) {
    const long f = std::lround(sample_z(sw.mu_bar, rng) * static_cast<double>(M));
    out.i = binomial(rng, N, p);
    out.j = s.j - hypergeometric(rng, f, s.j, M) + binomial(rng, f, p);
    if (counters) ++counters->d_events;
  } else {
    return wf_step(s, cfg, rng, counters);
  }
  return out;
}

/// r and the probability measure mu with r mu(dz) = z^{-1} Lambda(dz).
/// Beta(alpha, beta) parts need alpha > 1 and become Beta(alpha - 1, beta).
inline std::pair<double, SwitchingMeasure> wf_switching_from_measure(const SwitchingMeasure& lambda) {
  std::vector<Atom> atoms;
  std::vector<BetaComponent> comps;
  double r = 0.0;
  for (const auto& a : lambda.atoms()) {
    atoms.push_back({a.z, a.weight / a.z});
    r += a.weight / a.z;
  }
  for (const auto& b : lambda.components()) {
    if (!(b.alpha > 1.0)) throw std::domain_error("z^{-1} Lambda has infinite mass for a Beta part with alpha <= 1");
    const double mass = b.mass * std::exp(detail::log_beta(b.alpha - 1.0, b.beta) - detail::log_beta(b.alpha, b.beta));
    comps.push_back({b.alpha - 1.0, b.beta, mass});
    r += mass;
  }
  if (r == 0.0) return {0.0, SwitchingMeasure{}};
  for (auto& a : atoms) a.weight /= r;
  for (auto& b : comps) b.mass /= r;
  return {r, SwitchingMeasure(std::move(atoms), std::move(comps))};
}

inline bool wf_fixed(const WFState& s, const WFConfig& cfg) {
  return (s.i == 0 && s.j == 0) || (s.i == cfg.N && s.j == cfg.M());
}

struct WFTrajectory {
  std::vector<WFState> samples;
  std::optional<long> fixation_generation;
  int fixed_type = -1;  // 0 if all type 0, 1 if all type 1
  WFCounters counters;
};

/// Runs up to `generations` generations from (round(x0 N), round(y0 M)),
/// recording every `record_every` generations and the final state. Stops at
/// fixation when `stop_at_fixation` is set.
inline WFTrajectory run_trajectory(const WFConfig& cfg, double x0, double y0, long generations, long record_every,
                                   Rng& rng, bool stop_at_fixation = false) {
  cfg.validate();
  if (!(x0 >= 0.0 && x0 <= 1.0 && y0 >= 0.0 && y0 <= 1.0)) throw std::domain_error("WF: x0, y0 must lie in [0,1]");
  if (record_every < 1) throw std::domain_error("WF: record_every must be positive");
  WFTrajectory tr;
  WFState s{std::lround(x0 * static_cast<double>(cfg.N)), std::lround(y0 * static_cast<double>(cfg.M())), 0};
  tr.samples.push_back(s);
  const bool sim = cfg.switching && (cfg.switching->r > 0.0 || cfg.switching->r_bar > 0.0);
  auto note_fixation = [&] {
    if (!tr.fixation_generation && wf_fixed(s, cfg)) {
      tr.fixation_generation = s.generation;
      tr.fixed_type = s.i == 0 ? 1 : 0;
    }
  };
  note_fixation();
  while (s.generation < generations && !(stop_at_fixation && tr.fixation_generation)) {
    s = sim ? wf_sim_step(s, cfg, rng, &tr.counters) : wf_step(s, cfg, rng, &tr.counters);
    note_fixation();
    if (s.generation % record_every == 0) tr.samples.push_back(s);
  }
  if (tr.samples.back().generation != s.generation) tr.samples.push_back(s);
  return tr;
}

inline WFTrajectory run_trajectory(const WFConfig& cfg, double x0, double y0, long generations, long record_every,
                                   std::uint64_t seed) {
  Rng rng = make_stream(seed, experiment_id("forward-wf"), 0);
  return run_trajectory(cfg, x0, y0, generations, record_every, rng);
}

struct FixationSummary {
  std::size_t reps = 0;
  std::size_t fixed_type0 = 0;
  std::size_t fixed_type1 = 0;
  std::size_t unfixed = 0;
  long exchange_clamped = 0;
  long f_capped = 0;

  /// Fraction of all runs that fixed on type 0.
  double frequency() const { return reps ? static_cast<double>(fixed_type0) / static_cast<double>(reps) : 0.0; }
  double stderr_frequency() const {
    if (!reps) return 0.0;
    const double p = frequency();
    return std::sqrt(p * (1.0 - p) / static_cast<double>(reps));
  }
};

inline FixationSummary wf_fixation(const WFConfig& cfg, double x0, double y0, long max_generations, std::size_t reps,
                                   std::uint64_t seed, unsigned workers = 1) {
  const auto runs = run_replicates(reps, workers, [&](std::size_t r) {
    Rng rng = make_stream(seed, experiment_id("forward-wf-fixation"), r);
    const auto tr = run_trajectory(cfg, x0, y0, max_generations, max_generations, rng, true);
    return std::array<long, 3>{tr.fixed_type, tr.counters.exchange_clamped, tr.counters.f_capped};
  });
  FixationSummary out;
  out.reps = reps;
  for (const auto& r : runs) {
    if (r[0] == 0) ++out.fixed_type0;
    else if (r[0] == 1) ++out.fixed_type1;
    else ++out.unfixed;
    out.exchange_clamped += r[1];
    out.f_capped += r[2];
  }
  return out;
}

}  // namespace seedbank
