#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string_view>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "seedbank/blockcount.hpp"
#include "seedbank/measures.hpp"
#include "seedbank/parallel.hpp"
#include "seedbank/random.hpp"

namespace seedbank {

/// Type-0 frequencies among active (x) and dormant (y) individuals.
struct DiffusionState {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const DiffusionState&, const DiffusionState&) = default;
};

struct IntegratorSettings {
  double dt = 1e-4;
  double horizon = 1.0;
  double eps = 1e-3;           // jumps below eps are folded into the drift
  double boundary_tol = 0.0;   // absorption and boundary-hit threshold
  bool noise = true;           // false integrates the drift only
  long record_every = 1;       // grid steps between recorded states; 0 keeps only the ends
  bool stop_on_absorption = false;
  std::vector<double> checkpoints;  // extra times at which the state is captured

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::domain_error("dt must be positive");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::domain_error("horizon must be positive");
    if (dt > horizon) throw std::domain_error("dt must not exceed the horizon");
    if (!(eps > 0.0 && eps < 1.0)) throw std::domain_error("jump cutoff eps must lie in (0,1)");
    if (!(boundary_tol >= 0.0 && boundary_tol < 0.5)) throw std::domain_error("boundary_tol must lie in [0, 0.5)");
    if (record_every < 0) throw std::domain_error("record_every must be nonnegative");
    if (!std::is_sorted(checkpoints.begin(), checkpoints.end())) throw std::domain_error("checkpoints must be sorted");
    for (double c : checkpoints)
      if (!(c >= 0.0 && c <= horizon)) throw std::domain_error("checkpoints must lie in [0, horizon]");
  }
};

/// F-type jumps move x toward y (intensity z^-1 lambda_ad), D-type move y
/// toward x (intensity z^-1 lambda_da).
enum class JumpType { F, D };

struct JumpEvent {
  double time = 0.0;
  JumpType type = JumpType::F;
  double z = 0.0;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<DiffusionState> states;
  std::vector<DiffusionState> checkpoint_states;
  std::vector<JumpEvent> jumps;
  bool hit_00 = false;
  bool hit_11 = false;
  bool ran_to_horizon = false;
  double absorption_time = std::numeric_limits<double>::quiet_NaN();
  bool x_hit_0 = false;
  bool x_hit_1 = false;
  bool y_hit_0 = false;
  bool y_hit_1 = false;
  double end_time = 0.0;

  DiffusionState final_state() const { return states.back(); }
};

namespace detail {

/// Marked Poisson clock for the jumps of size >= eps of z^-1 m(dz).
///
/// Atoms get exact rates w/z. Each Beta part is covered by a dyadic envelope
/// [eps, 2 eps), [2 eps, 4 eps), ... on which the proposal rate is
/// mass P(Z in piece) / lo; a proposal z is kept with probability lo / z.
class JumpClock {
 public:
  JumpClock(const SwitchingMeasure& m, double eps) {
    for (const auto& a : m.atoms())
      if (a.z >= eps) add({a.z, a.z, a.weight / a.z, nullptr});
    for (const auto& c : m.components()) {
      for (double lo = eps; lo < 1.0;) {
        const double hi = std::min(1.0, 2.0 * lo);
        const double p = boost::math::ibeta(c.alpha, c.beta, hi) - boost::math::ibeta(c.alpha, c.beta, lo);
        if (p > 0.0) add({lo, hi, c.mass * p / lo, &c});
        lo = hi;
      }
    }
  }

  double rate() const noexcept { return total_; }

  /// One proposal; returns the jump size if it is accepted.
  std::optional<double> propose(Rng& rng) const {
    double target = uniform01(rng) * total_;
    std::size_t k = 0;
    while (k + 1 < pieces_.size() && target >= pieces_[k].rate) target -= pieces_[k++].rate;
    const auto& piece = pieces_[k];
    if (!piece.component) return piece.lo;
    const auto& c = *piece.component;
    const double f_lo = boost::math::ibeta(c.alpha, c.beta, piece.lo);
    const double f_hi = boost::math::ibeta(c.alpha, c.beta, piece.hi);
    double z = boost::math::ibeta_inv(c.alpha, c.beta, f_lo + uniform01(rng) * (f_hi - f_lo));
    z = std::clamp(z, piece.lo, piece.hi);
    if (uniform01(rng) * z <= piece.lo) return z;
    return std::nullopt;
  }

 private:
  struct Piece {
    double lo, hi, rate;
    const BetaComponent* component;
  };
  void add(Piece p) {
    pieces_.push_back(p);
    total_ += p.rate;
  }
  std::vector<Piece> pieces_;
  double total_ = 0.0;
};

struct Drift {
  const ModelParams& p;
  double small_ad;
  double small_da;

  double x(double x, double y) const { return -p.u1 * x + p.u2 * (1.0 - x) + (p.c + small_ad) * (y - x); }
  double y(double x, double y) const { return -p.u1p * y + p.u2p * (1.0 - y) + (p.c * p.K + small_da) * (x - y); }
};

/// Core time stepper; `dW(h)` supplies the Brownian increment for a step of length h.
///
/// X takes Euler-Maruyama steps and Y, which carries no noise, a trapezoidal
/// (Heun) step driven by the old and new X. Both are clamped to [0,1]; a Y
/// strictly inside (0,1) stays strictly inside across a grid step.
template <class Noise>
Trajectory integrate_core(const ModelParams& params, DiffusionState s, const IntegratorSettings& set, Rng& rng,
                          Noise&& dW) {
  params.validate();
  set.validate();
  if (!(s.x >= 0.0 && s.x <= 1.0 && s.y >= 0.0 && s.y <= 1.0))
    throw std::domain_error("initial state must lie in [0,1]^2");
  const Drift drift{params, small_jump_mass(params.lambda_ad, set.eps), small_jump_mass(params.lambda_da, set.eps)};
  const JumpClock clock_f(params.lambda_ad, set.eps);
  const JumpClock clock_d(params.lambda_da, set.eps);
  const double inf = std::numeric_limits<double>::infinity();
  const double T = set.horizon;
  const auto n_grid = static_cast<long>(std::ceil(T / set.dt - 1e-9));
  auto grid = [&](long k) { return k >= n_grid ? T : static_cast<double>(k) * set.dt; };

  Trajectory tr;
  double t = 0.0;
  long k = 0;
  std::size_t ci = 0;
  double next_f = clock_f.rate() > 0.0 ? exponential(rng, clock_f.rate()) : inf;
  double next_d = clock_d.rate() > 0.0 ? exponential(rng, clock_d.rate()) : inf;
  const double tol = set.boundary_tol;

  auto observe = [&] {
    if (s.x <= tol) tr.x_hit_0 = true;
    if (s.x >= 1.0 - tol) tr.x_hit_1 = true;
    if (s.y <= tol) tr.y_hit_0 = true;
    if (s.y >= 1.0 - tol) tr.y_hit_1 = true;
    const bool at00 = s.x <= tol && s.y <= tol;
    const bool at11 = s.x >= 1.0 - tol && s.y >= 1.0 - tol;
    if ((at00 || at11) && !tr.hit_00 && !tr.hit_11) {
      (at00 ? tr.hit_00 : tr.hit_11) = true;
      tr.absorption_time = t;
    }
  };
  auto record = [&] {
    tr.times.push_back(t);
    tr.states.push_back(s);
  };
  auto step = [&](double h) {
    const double by = drift.y(s.x, s.y);
    double xn = s.x + drift.x(s.x, s.y) * h;
    if (set.noise) xn += std::sqrt(std::max(s.x * (1.0 - s.x), 0.0)) * dW(h);
    xn = std::clamp(xn, 0.0, 1.0);
    double yn = s.y + 0.5 * h * (by + drift.y(xn, s.y + h * by));
    if (s.y > 0.0 && s.y < 1.0)
      yn = std::clamp(yn, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
    else
      yn = std::clamp(yn, 0.0, 1.0);
    s = {xn, yn};
  };

  record();
  while (ci < set.checkpoints.size() && set.checkpoints[ci] <= t) tr.checkpoint_states.push_back(s), ++ci;
  observe();
  bool stopped = set.stop_on_absorption && (tr.hit_00 || tr.hit_11);
  while (!stopped && k < n_grid) {
    const double grid_next = grid(k + 1);
    const double cp = ci < set.checkpoints.size() ? set.checkpoints[ci] : inf;
    const double stop = std::min({grid_next, next_f, next_d, cp});
    if (stop > t) step(stop - t);
    t = stop;
    const bool on_grid = stop == grid_next;
    if (on_grid) ++k;
    if (next_f == stop) {
      if (const auto z = clock_f.propose(rng)) {
        s.x = std::clamp(s.x + *z * (s.y - s.x), 0.0, 1.0);
        tr.jumps.push_back({t, JumpType::F, *z});
      }
      next_f = t + exponential(rng, clock_f.rate());
    }
    if (next_d == stop) {
      if (const auto z = clock_d.propose(rng)) {
        s.y = std::clamp(s.y + *z * (s.x - s.y), 0.0, 1.0);
        tr.jumps.push_back({t, JumpType::D, *z});
      }
      next_d = t + exponential(rng, clock_d.rate());
    }
    while (ci < set.checkpoints.size() && set.checkpoints[ci] <= t) tr.checkpoint_states.push_back(s), ++ci;
    observe();
    if (on_grid && set.record_every > 0 && k % set.record_every == 0) record();
    stopped = set.stop_on_absorption && (tr.hit_00 || tr.hit_11);
  }
  if (tr.times.back() != t) record();
  tr.end_time = t;
  tr.ran_to_horizon = k == n_grid;
  return tr;
}

}  // namespace detail

/// Integrates the seed bank (jump-)diffusion on [0, horizon].
inline Trajectory integrate(const ModelParams& params, const DiffusionState& s0, const IntegratorSettings& settings,
                            Rng& rng) {
  std::normal_distribution<double> normal;
  return detail::integrate_core(params, s0, settings, rng, [&](double h) { return std::sqrt(h) * normal(rng); });
}

inline Trajectory integrate(const ModelParams& params, const DiffusionState& s0, const IntegratorSettings& settings,
                            std::uint64_t seed) {
  Rng rng = make_stream(seed, experiment_id("diffusion"), 0);
  return integrate(params, s0, settings, rng);
}

/// Integrates with prescribed Brownian increments, one per grid step. Only for
/// models without jumps and without checkpoints off the grid.
inline Trajectory integrate_driven(const ModelParams& params, const DiffusionState& s0,
                                   const IntegratorSettings& settings, const std::vector<double>& increments) {
  if (params.has_simultaneous_switching()) throw std::domain_error("integrate_driven: jumps are not supported");
  std::size_t next = 0;
  Rng unused;
  return detail::integrate_core(params, s0, settings, unused, [&](double) {
    if (next >= increments.size()) throw std::domain_error("integrate_driven: ran out of increments");
    return increments[next++];
  });
}

/// max_k |Y_k - (y_0 e^{-cK t_k} + int_0^{t_k} cK e^{-cK(t_k - s)} X_s ds)| over
/// the recorded samples, with the convolution accumulated by the trapezoid rule.
inline double delay_residual(const Trajectory& traj, const ModelParams& params) {
  if (params.has_simultaneous_switching() || params.has_diffusion_mutation())
    throw std::domain_error("delay_residual: the delay representation needs zero mutation and no jumps");
  if (traj.states.empty()) return 0.0;
  const double a = params.c * params.K;
  const double y0 = traj.states.front().y;
  double conv = 0.0;
  double worst = 0.0;
  for (std::size_t k = 1; k < traj.states.size(); ++k) {
    const double h = traj.times[k] - traj.times[k - 1];
    const double decay = std::exp(-a * h);
    conv = decay * conv + 0.5 * h * a * (decay * traj.states[k - 1].x + traj.states[k].x);
    const double pred = y0 * std::exp(-a * traj.times[k]) + conv;
    worst = std::max(worst, std::abs(traj.states[k].y - pred));
  }
  return worst;
}

/// Mean of K X_t + Y_t at each checkpoint.
inline std::vector<Estimate> martingale_drift(const ModelParams& params, const DiffusionState& s0,
                                              IntegratorSettings settings, std::size_t reps, std::uint64_t seed,
                                              unsigned workers = 1) {
  settings.record_every = 0;
  const auto values = run_replicates(reps, workers, [&](std::size_t r) {
    Rng rng = make_stream(seed, experiment_id("martingale"), r);
    const auto tr = integrate(params, s0, settings, rng);
    std::vector<double> v;
    for (const auto& st : tr.checkpoint_states) v.push_back(params.K * st.x + st.y);
    return v;
  });
  std::vector<Estimate> out;
  for (std::size_t c = 0; c < settings.checkpoints.size(); ++c) {
    MeanAccumulator acc;
    for (const auto& v : values) acc.add(v[c]);
    out.push_back({acc.mean(), acc.stderr_mean(), acc.count});
  }
  return out;
}

/// E_{x,y}[X_t^n Y_t^m] for every exponent pair at every checkpoint, from
/// shared trajectories: result[time][pair].
inline std::vector<std::vector<Estimate>> duality_lhs_grid(const ModelParams& params, const DiffusionState& s0,
                                                           const std::vector<BlockCountState>& exponents,
                                                           IntegratorSettings settings, std::size_t reps,
                                                           std::uint64_t seed, unsigned workers = 1) {
  settings.record_every = 0;
  const std::size_t nt = settings.checkpoints.size();
  const auto finals = run_replicates(reps, workers, [&](std::size_t r) {
    Rng rng = make_stream(seed, experiment_id("duality-lhs"), r);
    return integrate(params, s0, settings, rng).checkpoint_states;
  });
  std::vector<std::vector<Estimate>> out(nt);
  for (std::size_t ti = 0; ti < nt; ++ti) {
    for (const auto& e : exponents) {
      MeanAccumulator acc;
      for (const auto& f : finals)
        acc.add(std::pow(f[ti].x, static_cast<double>(e.n)) * std::pow(f[ti].y, static_cast<double>(e.m)));
      out[ti].push_back({acc.mean(), acc.stderr_mean(), acc.count});
    }
  }
  return out;
}

inline Estimate duality_lhs(const ModelParams& params, double x, double y, long n, long m, double t, std::size_t reps,
                            std::uint64_t seed, IntegratorSettings settings = {}, unsigned workers = 1) {
  if (n < 0 || m < 0 || n + m < 1) throw std::domain_error("duality_lhs: need n + m >= 1");
  if (t == 0.0) return {std::pow(x, static_cast<double>(n)) * std::pow(y, static_cast<double>(m)), 0.0, 0};
  settings.horizon = t;
  settings.dt = std::min(settings.dt, t);
  settings.checkpoints = {t};
  return duality_lhs_grid(params, {x, y}, {{n, m}}, settings, reps, seed, workers)[0][0];
}

/// Boundary hit frequencies of one batch of runs.
struct HitFrequencies {
  double dt = 0.0;
  std::size_t reps = 0;
  std::size_t x0 = 0, x1 = 0, y0 = 0, y1 = 0;

  static double freq(std::size_t k, std::size_t n) { return n ? static_cast<double>(k) / static_cast<double>(n) : 0.0; }
  double x_hits_0() const { return freq(x0, reps); }
  double x_hits_1() const { return freq(x1, reps); }
  double y_hits_0() const { return freq(y0, reps); }
  double y_hits_1() const { return freq(y1, reps); }
};

/// Hit frequencies at settings.dt and at settings.dt / 2, from independent runs.
inline std::pair<HitFrequencies, HitFrequencies> boundary_hitting_stats(const ModelParams& params,
                                                                        const DiffusionState& s0,
                                                                        IntegratorSettings settings, std::size_t reps,
                                                                        std::uint64_t seed, unsigned workers = 1) {
  if (!(s0.x > 0.0 && s0.x < 1.0 && s0.y > 0.0 && s0.y < 1.0))
    throw std::domain_error("boundary_hitting_stats: start must be interior");
  settings.record_every = 0;
  settings.stop_on_absorption = false;
  settings.checkpoints.clear();
  auto batch = [&](double dt, std::string_view name) {
    IntegratorSettings s = settings;
    s.dt = dt;
    const auto flags = run_replicates(reps, workers, [&](std::size_t r) {
      Rng rng = make_stream(seed, experiment_id(name), r);
      const auto tr = integrate(params, s0, s, rng);
      return std::array<bool, 4>{tr.x_hit_0, tr.x_hit_1, tr.y_hit_0, tr.y_hit_1};
    });
    HitFrequencies h;
    h.dt = dt;
    h.reps = reps;
    for (const auto& f : flags) {
      h.x0 += f[0];
      h.x1 += f[1];
      h.y0 += f[2];
      h.y1 += f[3];
    }
    return h;
  };
  return {batch(settings.dt, "boundary-dt"), batch(0.5 * settings.dt, "boundary-half-dt")};
}

struct DiffusionFixation {
  std::size_t reps = 0;
  std::size_t hit_11 = 0;
  std::size_t hit_00 = 0;
  std::size_t unfixed = 0;

  /// Fraction of all runs absorbed at (1,1).
  double frequency() const { return reps ? static_cast<double>(hit_11) / static_cast<double>(reps) : 0.0; }
  double stderr_frequency() const {
    if (!reps) return 0.0;
    const double p = frequency();
    return std::sqrt(p * (1.0 - p) / static_cast<double>(reps));
  }
};

/// Runs to absorption at (0,0) or (1,1) within settings.horizon.
inline DiffusionFixation diffusion_fixation(const ModelParams& params, const DiffusionState& s0,
                                            IntegratorSettings settings, std::size_t reps, std::uint64_t seed,
                                            unsigned workers = 1) {
  settings.record_every = 0;
  settings.stop_on_absorption = true;
  settings.checkpoints.clear();
  const auto outcome = run_replicates(reps, workers, [&](std::size_t r) {
    Rng rng = make_stream(seed, experiment_id("diffusion-fixation"), r);
    const auto tr = integrate(params, s0, settings, rng);
    return tr.hit_11 ? 1 : tr.hit_00 ? 0 : -1;
  });
  DiffusionFixation out;
  out.reps = reps;
  for (int o : outcome) {
    if (o == 1) ++out.hit_11;
    else if (o == 0) ++out.hit_00;
    else ++out.unfixed;
  }
  return out;
}

}  // namespace seedbank
