#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>

#include "seedbank/measures.hpp"
#include "seedbank/parallel.hpp"
#include "seedbank/random.hpp"
#include "seedbank/rates.hpp"

namespace seedbank {

/// Numbers of active (n) and dormant (m) lines.
struct BlockCountState {
  long n = 0;
  long m = 0;
  long total() const noexcept { return n + m; }
  friend auto operator<=>(const BlockCountState&, const BlockCountState&) = default;
};

struct BlockCountTransition {
  BlockCountState target;
  double rate = 0.0;
  friend bool operator==(const BlockCountTransition&, const BlockCountTransition&) = default;
};

/// Monte Carlo mean with its standard error; `stderr_mean` is 0 for exact values.
struct Estimate {
  double value = 0.0;
  double stderr_mean = 0.0;
  std::size_t samples = 0;
};

/// Outgoing transitions of the block counting process with positive rate, in
/// the order merge, deactivations k = 1..n, activations l = 1..m.
inline std::vector<BlockCountTransition> bc_transition_rates(const BlockCountState& s, const ModelParams& p) {
  if (s.n < 0 || s.m < 0) throw std::domain_error("block counts must be nonnegative");
  std::vector<BlockCountTransition> out;
  const double merge = RateKernel::merge_rate(s.n);
  if (merge > 0.0) out.push_back({{s.n - 1, s.m}, merge});
  for (long k = 1; k <= s.n; ++k) {
    double r = group_switch_rate(p.lambda_ad, s.n, k);
    if (k == 1) r += p.c * static_cast<double>(s.n);
    if (r > 0.0) out.push_back({{s.n - k, s.m + k}, r});
  }
  for (long l = 1; l <= s.m; ++l) {
    double r = group_switch_rate(p.lambda_da, s.m, l);
    if (l == 1) r += p.c * p.K * static_cast<double>(s.m);
    if (r > 0.0) out.push_back({{s.n + l, s.m - l}, r});
  }
  return out;
}

/// Runs the block counting chain from `s` at time `t` until `t_end`, or until a
/// single line remains when `stop_at_mrca` is set. Calls `on_event(time, state)`
/// after every jump and returns the stopping time.
template <class OnEvent>
double advance_blockcount(BlockCountState& s, const RateKernel& kernel, Rng& rng, double t, double t_end,
                          bool stop_at_mrca, OnEvent&& on_event) {
  for (;;) {
    if (stop_at_mrca && s.total() <= 1) return t;
    const double q = kernel.total(s.n, s.m);
    if (q <= 0.0) {
      if (stop_at_mrca)
        throw std::domain_error("MRCA unreachable: " + std::to_string(s.m) +
                                " dormant lines can never reactivate (c = 0 and no dormant->active switching)");
      return t_end;
    }
    const double wait = exponential(rng, q);
    if (t + wait > t_end) return t_end;
    t += wait;
    const auto ev = select_event(kernel, s.n, s.m, uniform01(rng) * q);
    switch (ev.kind) {
      case EventKind::merge: s.n -= 1; break;
      case EventKind::to_dormant: s.n -= ev.size; s.m += ev.size; break;
      case EventKind::to_active: s.n += ev.size; s.m -= ev.size; break;
    }
    on_event(t, s);
  }
}

struct BlockCountPath {
  std::vector<double> times;
  std::vector<BlockCountState> states;
  bool reached_mrca = false;
  double end_time = 0.0;
};

inline BlockCountPath simulate_blockcount(const BlockCountState& s0, const ModelParams& params, const StopRule& stop,
                                          Rng& rng) {
  if (s0.n < 0 || s0.m < 0 || s0.total() < 1) throw std::domain_error("simulate_blockcount: need n + m >= 1");
  if (!stop.at_mrca && !std::isfinite(stop.horizon))
    throw std::domain_error("simulate_blockcount: a horizon-only stop needs a finite horizon");
  const RateKernel kernel(params, s0.total());
  BlockCountPath path;
  path.times.push_back(0.0);
  path.states.push_back(s0);
  BlockCountState s = s0;
  path.end_time = advance_blockcount(s, kernel, rng, 0.0, stop.horizon, stop.at_mrca, [&](double t, const BlockCountState& st) {
    path.times.push_back(t);
    path.states.push_back(st);
  });
  path.reached_mrca = s.total() == 1 && stop.at_mrca;
  return path;
}

inline BlockCountPath simulate_blockcount(const BlockCountState& s0, const ModelParams& params, const StopRule& stop,
                                          std::uint64_t seed) {
  Rng rng = make_stream(seed, experiment_id("blockcount"), 0);
  return simulate_blockcount(s0, params, stop, rng);
}

/// Time until a single line remains.
inline double blockcount_absorption_time(const BlockCountState& s0, const RateKernel& kernel, Rng& rng) {
  BlockCountState s = s0;
  return advance_blockcount(s, kernel, rng, 0.0, std::numeric_limits<double>::infinity(), true,
                            [](double, const BlockCountState&) {});
}

/// States at each of the increasing `times` (lines keep switching after the MRCA).
inline std::vector<BlockCountState> blockcount_states_at(const BlockCountState& s0, const RateKernel& kernel, Rng& rng,
                                                         const std::vector<double>& times) {
  std::vector<BlockCountState> out;
  out.reserve(times.size());
  BlockCountState s = s0;
  double t = 0.0;
  for (double target : times) {
    if (target < t) throw std::domain_error("blockcount_states_at: times must be increasing");
    t = advance_blockcount(s, kernel, rng, t, target, false, [](double, const BlockCountState&) {});
    out.push_back(s);
  }
  return out;
}

namespace detail {

/// Index of (a, d) within the lattice {1 <= a + d <= S}, grouped by level a + d.
inline std::size_t lattice_index(const BlockCountState& s) {
  const auto level = static_cast<std::size_t>(s.total());
  return (level - 1) * (level + 2) / 2 + static_cast<std::size_t>(s.n);
}

inline std::size_t lattice_size(long max_total) {
  const auto S = static_cast<std::size_t>(max_total);
  return S * (S + 3) / 2;
}

/// States reachable from s0 with their outgoing transitions.
struct ReachableLattice {
  long max_total = 0;
  std::vector<char> reachable;
  std::vector<std::vector<BlockCountTransition>> transitions;
  std::vector<BlockCountState> order;  // discovery order
};

inline ReachableLattice explore(const BlockCountState& s0, const ModelParams& p) {
  ReachableLattice lat;
  lat.max_total = s0.total();
  const auto size = lattice_size(lat.max_total);
  lat.reachable.assign(size, 0);
  lat.transitions.resize(size);
  std::deque<BlockCountState> queue{s0};
  lat.reachable[lattice_index(s0)] = 1;
  while (!queue.empty()) {
    const auto s = queue.front();
    queue.pop_front();
    lat.order.push_back(s);
    auto& tr = lat.transitions[lattice_index(s)];
    tr = bc_transition_rates(s, p);
    for (const auto& t : tr) {
      const auto idx = lattice_index(t.target);
      if (!lat.reachable[idx]) {
        lat.reachable[idx] = 1;
        queue.push_back(t.target);
      }
    }
  }
  return lat;
}

}  // namespace detail

/// Expected time to the MRCA and expected total active / dormant line-time
/// before it, from first-step analysis on the finite lattice.
struct FirstStepResult {
  double tmrca = 0.0;
  double active_length = 0.0;
  double dormant_length = 0.0;
};

/// Solves q(s) E[s] - sum_{s'} q(s,s') E[s'] = reward(s) level by level
/// (merges lower the level, switches stay in it), for rewards 1, a and d.
///
/// Throws std::domain_error if some reachable configuration can never get
/// down to a single line.
inline FirstStepResult first_step_analysis(const BlockCountState& s0, const ModelParams& params) {
  params.validate();
  if (s0.n < 0 || s0.m < 0 || s0.total() < 1) throw std::domain_error("first-step analysis: need n + m >= 1");
  if (s0.total() == 1) return {};
  const auto lat = detail::explore(s0, params);
  const long S = lat.max_total;

  // Which reachable states can reach level 1.
  std::vector<char> can_absorb(lat.reachable.size(), 0);
  for (long level = 1; level <= S; ++level) {
    std::vector<BlockCountState> members;
    for (long a = 0; a <= level; ++a) {
      BlockCountState s{a, level - a};
      if (lat.reachable[detail::lattice_index(s)]) members.push_back(s);
    }
    if (level == 1) {
      for (const auto& s : members) can_absorb[detail::lattice_index(s)] = 1;
      continue;
    }
    bool changed = true;
    while (changed) {
      changed = false;
      for (const auto& s : members) {
        const auto idx = detail::lattice_index(s);
        if (can_absorb[idx]) continue;
        for (const auto& t : lat.transitions[idx]) {
          if (can_absorb[detail::lattice_index(t.target)]) {
            can_absorb[idx] = 1;
            changed = true;
            break;
          }
        }
      }
    }
    for (const auto& s : members) {
      if (!can_absorb[detail::lattice_index(s)]) {
        throw std::domain_error("MRCA unreachable from (" + std::to_string(s0.n) + "," + std::to_string(s0.m) +
                                "): configuration (" + std::to_string(s.n) + "," + std::to_string(s.m) +
                                ") is reachable but can never coalesce down to one line "
                                "(dormant lines cannot reactivate when c = 0 and lambda_da = 0)");
      }
    }
  }

  Eigen::MatrixXd values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(lat.reachable.size()), 3);
  for (long level = 2; level <= S; ++level) {
    std::vector<BlockCountState> members;
    std::vector<Eigen::Index> local(static_cast<std::size_t>(level + 1), -1);
    for (long a = 0; a <= level; ++a) {
      BlockCountState s{a, level - a};
      if (lat.reachable[detail::lattice_index(s)]) {
        local[static_cast<std::size_t>(a)] = static_cast<Eigen::Index>(members.size());
        members.push_back(s);
      }
    }
    if (members.empty()) continue;
    const auto r = static_cast<Eigen::Index>(members.size());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(r, r);
    Eigen::MatrixXd rhs(r, 3);
    for (Eigen::Index i = 0; i < r; ++i) {
      const auto& s = members[static_cast<std::size_t>(i)];
      rhs(i, 0) = 1.0;
      rhs(i, 1) = static_cast<double>(s.n);
      rhs(i, 2) = static_cast<double>(s.m);
      double q = 0.0;
      for (const auto& t : lat.transitions[detail::lattice_index(s)]) {
        q += t.rate;
        if (t.target.total() == level) {
          A(i, local[static_cast<std::size_t>(t.target.n)]) -= t.rate;
        } else {
          rhs.row(i) += t.rate * values.row(static_cast<Eigen::Index>(detail::lattice_index(t.target)));
        }
      }
      A(i, i) += q;
    }
    const Eigen::MatrixXd sol = A.partialPivLu().solve(rhs);
    for (Eigen::Index i = 0; i < r; ++i)
      values.row(static_cast<Eigen::Index>(detail::lattice_index(members[static_cast<std::size_t>(i)]))) = sol.row(i);
  }
  const auto idx = static_cast<Eigen::Index>(detail::lattice_index(s0));
  return {values(idx, 0), values(idx, 1), values(idx, 2)};
}

inline double expected_tmrca_first_step(const BlockCountState& s0, const ModelParams& params) {
  return first_step_analysis(s0, params).tmrca;
}

/// (E[active line-time], E[dormant line-time]) before the MRCA.
inline std::pair<double, double> expected_branch_lengths_first_step(const BlockCountState& s0,
                                                                    const ModelParams& params) {
  const auto r = first_step_analysis(s0, params);
  return {r.active_length, r.dormant_length};
}

/// Law of (N_t, M_t) started from s0.
struct TransientDistribution {
  std::vector<BlockCountState> states;
  std::vector<double> probabilities;
  double truncated_mass = 0.0;  // Poisson tail left out of the series

  double expectation(double x, double y) const {
    double e = 0.0;
    for (std::size_t i = 0; i < states.size(); ++i)
      e += probabilities[i] * std::pow(x, static_cast<double>(states[i].n)) *
           std::pow(y, static_cast<double>(states[i].m));
    return e;
  }
};

/// Exact transient law by uniformization: P(t) = sum_k Pois(k; L t) P^k with
/// P = I + Q / L and L the largest exit rate, truncated once the remaining
/// Poisson mass drops below `tail`.
inline TransientDistribution transient_distribution(const BlockCountState& s0, const ModelParams& params, double t,
                                                    double tail = 1e-12) {
  params.validate();
  if (s0.n < 0 || s0.m < 0 || s0.total() < 1) throw std::domain_error("transient_distribution: need n + m >= 1");
  if (!(t >= 0.0) || !std::isfinite(t)) throw std::domain_error("transient_distribution: t must be finite and >= 0");
  const auto lat = detail::explore(s0, params);
  const auto& states = lat.order;
  std::map<BlockCountState, std::size_t> local;
  for (std::size_t i = 0; i < states.size(); ++i) local[states[i]] = i;

  std::vector<double> exit(states.size(), 0.0);
  double unif = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    for (const auto& tr : lat.transitions[detail::lattice_index(states[i])]) exit[i] += tr.rate;
    unif = std::max(unif, exit[i]);
  }

  TransientDistribution out;
  out.states = states;
  out.probabilities.assign(states.size(), 0.0);
  if (t == 0.0 || unif == 0.0) {
    out.probabilities[0] = 1.0;
    return out;
  }

  const double lt = unif * t;
  std::vector<double> v(states.size(), 0.0), next(states.size(), 0.0);
  v[0] = 1.0;
  double cumulative = 0.0;
  const auto k_max = static_cast<long>(std::ceil(lt + 60.0 * std::sqrt(lt) + 200.0));
  for (long k = 0; k <= k_max; ++k) {
    const double log_w = -lt + static_cast<double>(k) * std::log(lt) - boost::math::lgamma(static_cast<double>(k) + 1.0);
    const double w = std::exp(log_w);
    cumulative += w;
    for (std::size_t i = 0; i < v.size(); ++i) out.probabilities[i] += w * v[i];
    if (static_cast<double>(k) >= lt && 1.0 - cumulative <= tail) break;
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] == 0.0) continue;
      next[i] += v[i] * (1.0 - exit[i] / unif);
      for (const auto& tr : lat.transitions[detail::lattice_index(states[i])])
        next[local.at(tr.target)] += v[i] * tr.rate / unif;
    }
    v.swap(next);
  }
  out.truncated_mass = std::max(0.0, 1.0 - cumulative);
  return out;
}

/// How duality_rhs evaluates E^{n,m}[x^N_t y^M_t].
struct DualityMethod {
  enum class Kind { exact, monte_carlo };
  Kind kind = Kind::exact;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
  unsigned workers = 1;

  static DualityMethod exact() { return {}; }
  static DualityMethod monte_carlo(std::size_t reps, std::uint64_t seed, unsigned workers = 1) {
    return {Kind::monte_carlo, reps, seed, workers};
  }
};

/// Stream family for block-count replicates started at (n, m).
inline std::uint64_t blockcount_stream_family(std::string_view name, const BlockCountState& s0) {
  return experiment_id(name) ^ splitmix64(static_cast<std::uint64_t>(s0.n) * 0x100000001ULL +
                                          static_cast<std::uint64_t>(s0.m));
}

/// `reps` independent replicates of (N_t, M_t) at each of `times`; row r holds
/// replicate r.
inline std::vector<std::vector<BlockCountState>> sample_blockcount_states(const BlockCountState& s0,
                                                                          const ModelParams& params,
                                                                          const std::vector<double>& times,
                                                                          std::size_t reps, std::uint64_t seed,
                                                                          unsigned workers) {
  const RateKernel kernel(params, s0.total());
  const auto family = blockcount_stream_family("blockcount-states", s0);
  return run_replicates(reps, workers, [&](std::size_t r) {
    Rng rng = make_stream(seed, family, r);
    return blockcount_states_at(s0, kernel, rng, times);
  });
}

/// Right-hand side of the moment duality: E^{n,m}[x^{N_t} y^{M_t}].
inline Estimate duality_rhs(long n, long m, double x, double y, const ModelParams& params, double t,
                            const DualityMethod& method = DualityMethod::exact()) {
  if (n < 0 || m < 0 || n + m < 1) throw std::domain_error("duality_rhs: need n + m >= 1");
  if (!(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0)) throw std::domain_error("duality_rhs: x, y must lie in [0,1]");
  if (t == 0.0) return {std::pow(x, static_cast<double>(n)) * std::pow(y, static_cast<double>(m)), 0.0, 0};
  if (method.kind == DualityMethod::Kind::exact) {
    return {transient_distribution({n, m}, params, t).expectation(x, y), 0.0, 0};
  }
  const auto samples = sample_blockcount_states({n, m}, params, {t}, method.reps, method.seed, method.workers);
  MeanAccumulator acc;
  for (const auto& row : samples)
    acc.add(std::pow(x, static_cast<double>(row[0].n)) * std::pow(y, static_cast<double>(row[0].m)));
  return {acc.mean(), acc.stderr_mean(), acc.count};
}

/// One row of a sample-size scan.
struct ScanRow {
  long n = 0;
  double mean = 0.0;
  double stderr_mean = 0.0;
  double ratio = 0.0;
};

/// Mean T_MRCA from (n, 0) for each n, with mean / log(log(n)).
inline std::vector<ScanRow> tmrca_loglog_scan(const ModelParams& params, const std::vector<long>& n_list,
                                              std::size_t reps, std::uint64_t seed, unsigned workers = 1) {
  std::vector<ScanRow> rows;
  for (long n : n_list) {
    if (n < 16) throw std::domain_error("tmrca_loglog_scan: sample sizes must be at least 16");
    const RateKernel kernel(params, n);
    const auto family = blockcount_stream_family("tmrca-scan", {n, 0});
    const auto times = run_replicates(reps, workers, [&](std::size_t r) {
      Rng rng = make_stream(seed, family, r);
      return blockcount_absorption_time({n, 0}, kernel, rng);
    });
    const auto acc = accumulate(times, [](double v) { return v; });
    rows.push_back({n, acc.mean(), acc.stderr_mean(), acc.mean() / std::log(std::log(static_cast<double>(n)))});
  }
  return rows;
}

namespace detail {

inline ScanRow lines_at(const BlockCountState& s0, long label, const ModelParams& params, double t_probe,
                        std::size_t reps, std::uint64_t seed, unsigned workers) {
  const RateKernel kernel(params, s0.total());
  const auto family = blockcount_stream_family("coming-down-scan", s0);
  const auto counts = run_replicates(reps, workers, [&](std::size_t r) {
    Rng rng = make_stream(seed, family, r);
    return blockcount_states_at(s0, kernel, rng, {t_probe}).front().total();
  });
  const auto acc = accumulate(counts, [](long v) { return v; });
  return {label, acc.mean(), acc.stderr_mean(), std::numeric_limits<double>::quiet_NaN()};
}

inline void fill_ratios(std::vector<ScanRow>& rows) {
  for (std::size_t k = 1; k < rows.size(); ++k) rows[k].ratio = rows[k].mean / rows[k - 1].mean;
}

}  // namespace detail

/// Mean number of lines N_t + M_t at `t_probe` from (n, 0), for each n.
/// `ratio` is the mean relative to the previous row (NaN on the first row).
///
/// A finite-n proxy only: coming down from infinity is not decidable by
/// simulation.
inline std::vector<ScanRow> coming_down_scan(const ModelParams& params, const std::vector<long>& n_list,
                                             double t_probe, std::size_t reps, std::uint64_t seed,
                                             unsigned workers = 1) {
  if (!(t_probe > 0.0)) throw std::domain_error("coming_down_scan: t_probe must be positive");
  std::vector<ScanRow> rows;
  for (long n : n_list) {
    if (n < 1) throw std::domain_error("coming_down_scan: sample sizes must be positive");
    rows.push_back(detail::lines_at({n, 0}, n, params, t_probe, reps, seed, workers));
  }
  detail::fill_ratios(rows);
  return rows;
}

/// Same scan from (n, m) with a growing dormant count m; rows are labelled by
/// m. A heuristic stand-in for starts with infinitely many dormant lines,
/// which only come down when the dormant-to-active measure has an atom at 1.
inline std::vector<ScanRow> coming_down_scan_dormant(const ModelParams& params, long n, const std::vector<long>& m_list,
                                                     double t_probe, std::size_t reps, std::uint64_t seed,
                                                     unsigned workers = 1) {
  if (!(t_probe > 0.0)) throw std::domain_error("coming_down_scan_dormant: t_probe must be positive");
  if (n < 0) throw std::domain_error("coming_down_scan_dormant: n must be non-negative");
  std::vector<ScanRow> rows;
  for (long m : m_list) {
    if (m < 1) throw std::domain_error("coming_down_scan_dormant: dormant counts must be positive");
    rows.push_back(detail::lines_at({n, m}, m, params, t_probe, reps, seed, workers));
  }
  detail::fill_ratios(rows);
  return rows;
}

}  // namespace seedbank
