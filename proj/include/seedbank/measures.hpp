#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace seedbank {

/// Point mass `weight` at location `z` in (0, 1].
struct Atom {
  double z = 1.0;
  double weight = 0.0;
  friend bool operator==(const Atom&, const Atom&) = default;
};

/// `mass` times the Beta(alpha, beta) density on (0, 1).
struct BetaComponent {
  double alpha = 1.0;
  double beta = 1.0;
  double mass = 0.0;
  friend bool operator==(const BetaComponent&, const BetaComponent&) = default;
};

namespace detail {

inline double log_beta(double a, double b) {
  return boost::math::lgamma(a) + boost::math::lgamma(b) - boost::math::lgamma(a + b);
}

inline double log_choose(long n, long k) {
  return boost::math::lgamma(static_cast<double>(n) + 1.0) -
         boost::math::lgamma(static_cast<double>(k) + 1.0) -
         boost::math::lgamma(static_cast<double>(n - k) + 1.0);
}

inline bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace detail

/// Finite measure on (0, 1] made of atoms and Beta-density components.
///
/// Immutable once built; safe to share between threads. The zero measure
/// (default constructed) is valid.
class SwitchingMeasure {
 public:
  SwitchingMeasure() = default;
  SwitchingMeasure(std::vector<Atom> atoms, std::vector<BetaComponent> components)
      : atoms_(std::move(atoms)), components_(std::move(components)) {
    for (const auto& a : atoms_) check_atom(a);
    for (const auto& c : components_) check_component(c);
  }

  static SwitchingMeasure atom(double z, double weight) { return {{Atom{z, weight}}, {}}; }
  static SwitchingMeasure beta(double alpha, double beta, double mass) {
    return {{}, {BetaComponent{alpha, beta, mass}}};
  }

  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  const std::vector<BetaComponent>& components() const noexcept { return components_; }
  bool is_zero() const noexcept { return atoms_.empty() && components_.empty(); }

  /// Same measure with every weight and mass multiplied by `factor` > 0.
  SwitchingMeasure scaled(double factor) const {
    if (!detail::positive_finite(factor)) throw std::domain_error("scale factor must be positive");
    auto atoms = atoms_;
    auto comps = components_;
    for (auto& a : atoms) a.weight *= factor;
    for (auto& c : comps) c.mass *= factor;
    return {std::move(atoms), std::move(comps)};
  }

  friend bool operator==(const SwitchingMeasure&, const SwitchingMeasure&) = default;

 private:
  static void check_atom(const Atom& a) {
    if (!(std::isfinite(a.z) && a.z > 0.0 && a.z <= 1.0))
      throw std::domain_error("atom location must lie in (0,1]");
    if (!detail::positive_finite(a.weight)) throw std::domain_error("atom weight must be positive");
  }
  static void check_component(const BetaComponent& c) {
    if (!detail::positive_finite(c.alpha) || !detail::positive_finite(c.beta))
      throw std::domain_error("beta parameters must be positive");
    if (!detail::positive_finite(c.mass)) throw std::domain_error("beta mass must be positive");
  }

  std::vector<Atom> atoms_;
  std::vector<BetaComponent> components_;
};

/// All rates of the model.
///
/// `u_active` / `u_dormant` are the coalescent-side mutation rates u and u';
/// mutations are laid down at u/2 and u'/2. `u1, u2, u1p, u2p` drive the
/// forward diffusion. `lambda_ad` moves lines active -> dormant (backwards in
/// time), `lambda_da` dormant -> active.
struct ModelParams {
  double c = 1.0;
  double K = 1.0;
  double u1 = 0.0;
  double u2 = 0.0;
  double u1p = 0.0;
  double u2p = 0.0;
  double u_active = 0.0;
  double u_dormant = 0.0;
  SwitchingMeasure lambda_ad;
  SwitchingMeasure lambda_da;

  void validate() const {
    auto nonneg = [](double v, const char* name) {
      if (!(std::isfinite(v) && v >= 0.0))
        throw std::domain_error(std::string(name) + " must be a nonnegative finite number");
    };
    nonneg(c, "c");
    nonneg(u1, "u1");
    nonneg(u2, "u2");
    nonneg(u1p, "u1p");
    nonneg(u2p, "u2p");
    nonneg(u_active, "u_active");
    nonneg(u_dormant, "u_dormant");
    if (!detail::positive_finite(K)) throw std::domain_error("K must be positive");
  }

  bool has_simultaneous_switching() const noexcept {
    return !lambda_ad.is_zero() || !lambda_da.is_zero();
  }
  bool has_diffusion_mutation() const noexcept {
    return u1 != 0.0 || u2 != 0.0 || u1p != 0.0 || u2p != 0.0;
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

inline double total_mass(const SwitchingMeasure& m) {
  double s = 0.0;
  for (const auto& a : m.atoms()) s += a.weight;
  for (const auto& c : m.components()) s += c.mass;
  return s;
}

/// m({1}); Beta parts carry no atom there.
inline double mass_at_one(const SwitchingMeasure& m) {
  double s = 0.0;
  for (const auto& a : m.atoms())
    if (a.z == 1.0) s += a.weight;
  return s;
}

/// Aggregate rate at which exactly k of b eligible blocks flip together:
/// C(b,k) * integral of z^(k-1) (1-z)^(b-k) m(dz).
///
/// The rate of one specific k-subset is this value divided by C(b,k).
inline double group_switch_rate(const SwitchingMeasure& m, long b, long k) {
  if (b < 1 || k < 1 || k > b) throw std::domain_error("group_switch_rate: need 1 <= k <= b");
  if (m.is_zero()) return 0.0;
  const double lchoose = detail::log_choose(b, k);
  double rate = 0.0;
  for (const auto& a : m.atoms()) {
    if (a.z == 1.0) {
      if (k == b) rate += a.weight;
      continue;
    }
    const double log_term = lchoose + static_cast<double>(k - 1) * std::log(a.z) +
                            static_cast<double>(b - k) * std::log1p(-a.z);
    rate += a.weight * std::exp(log_term);
  }
  for (const auto& c : m.components()) {
    const double log_ratio = detail::log_beta(c.alpha + static_cast<double>(k - 1),
                                              c.beta + static_cast<double>(b - k)) -
                             detail::log_beta(c.alpha, c.beta);
    rate += c.mass * std::exp(lchoose + log_ratio);
  }
  return rate;
}

/// Sum over k = 1..b of group_switch_rate(m, b, k), i.e. the integral of
/// (1 - (1-z)^b) / z against m. Zero for b = 0.
inline double total_switch_rate(const SwitchingMeasure& m, long b) {
  if (b <= 0) return 0.0;
  double rate = 0.0;
  for (const auto& a : m.atoms()) {
    if (a.z == 1.0) {
      rate += a.weight;
    } else {
      rate += a.weight * -std::expm1(static_cast<double>(b) * std::log1p(-a.z)) / a.z;
    }
  }
  // (1 - (1-z)^b) / z = sum_{j<b} (1-z)^j, and B(a, b+j+1) / B(a, b+j) = (b+j) / (a+b+j).
  for (const auto& c : m.components()) {
    double ratio = 1.0;
    double sum = 0.0;
    for (long j = 0; j < b; ++j) {
      sum += ratio;
      ratio *= (c.beta + static_cast<double>(j)) / (c.alpha + c.beta + static_cast<double>(j));
    }
    rate += c.mass * sum;
  }
  return rate;
}

/// Rate of jumps of size >= eps under the intensity z^-1 m(dz).
inline double jump_activity_above(const SwitchingMeasure& m, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::domain_error("jump cutoff must lie in (0,1)");
  double rate = 0.0;
  for (const auto& a : m.atoms())
    if (a.z >= eps) rate += a.weight / a.z;
  if (!m.components().empty()) {
    boost::math::quadrature::tanh_sinh<double> integrator;
    for (const auto& c : m.components()) {
      const double log_norm = detail::log_beta(c.alpha, c.beta);
      auto integrand = [&](double z) {
        if (z <= 0.0 || z >= 1.0) return 0.0;
        return std::exp((c.alpha - 2.0) * std::log(z) + (c.beta - 1.0) * std::log1p(-z) - log_norm);
      };
      rate += c.mass * integrator.integrate(integrand, eps, 1.0, 1e-10);
    }
  }
  return rate;
}

/// m([0, eps)): coefficient of the drift that compensates the jumps below the
/// cutoff (first-moment matching).
inline double small_jump_mass(const SwitchingMeasure& m, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::domain_error("jump cutoff must lie in (0,1)");
  double mass = 0.0;
  for (const auto& a : m.atoms())
    if (a.z < eps) mass += a.weight;
  for (const auto& c : m.components()) mass += c.mass * boost::math::ibeta(c.alpha, c.beta, eps);
  return mass;
}

/// E[-log Y] for Y distributed as m / total_mass(m).
///
/// Finite for every representable measure (atoms sit at z > 0 and Beta
/// components have alpha > 0), so the divergent case cannot be expressed.
inline double neg_log_moment(const SwitchingMeasure& m) {
  const double total = total_mass(m);
  if (!(total > 0.0)) throw std::domain_error("neg_log_moment: zero measure cannot be normalized");
  double s = 0.0;
  for (const auto& a : m.atoms()) s -= a.weight * std::log(a.z);
  for (const auto& c : m.components())
    s += c.mass * (boost::math::digamma(c.alpha + c.beta) - boost::math::digamma(c.alpha));
  return s / total;
}

/// Precomputed total_switch_rate(m, b) for b = 0..max_blocks.
///
/// The simulators look totals up once per event; Beta components would
/// otherwise cost O(b) per lookup.
class SwitchRateTable {
 public:
  SwitchRateTable() = default;
  SwitchRateTable(const SwitchingMeasure& m, long max_blocks) : totals_(static_cast<std::size_t>(std::max(0L, max_blocks)) + 1, 0.0) {
    for (const auto& a : m.atoms()) {
      for (long b = 1; b <= max_blocks; ++b) {
        totals_[static_cast<std::size_t>(b)] +=
            a.z == 1.0 ? a.weight
                       : a.weight * -std::expm1(static_cast<double>(b) * std::log1p(-a.z)) / a.z;
      }
    }
    for (const auto& c : m.components()) {
      double ratio = 1.0;
      double sum = 0.0;
      for (long b = 1; b <= max_blocks; ++b) {
        sum += ratio;
        ratio *= (c.beta + static_cast<double>(b - 1)) / (c.alpha + c.beta + static_cast<double>(b - 1));
        totals_[static_cast<std::size_t>(b)] += c.mass * sum;
      }
    }
  }

  long max_blocks() const noexcept { return static_cast<long>(totals_.size()) - 1; }

  double operator()(long b) const {
    if (b <= 0) return 0.0;
    if (b > max_blocks()) throw std::out_of_range("SwitchRateTable: block count beyond table");
    return totals_[static_cast<std::size_t>(b)];
  }

 private:
  std::vector<double> totals_;
};

/// Picks the flip size k in 1..b for a switching event whose rate is
/// `single_extra` (spontaneous part, added to k = 1) plus group_switch_rate(m, b, k).
///
/// `target` is a point in [0, single_extra + total_switch_rate(m, b)); sizes
/// are scanned in increasing order. If rounding leaves `target` past the last
/// bucket, the largest size with positive rate is returned.
inline long select_flip_size(const SwitchingMeasure& m, long b, double single_extra, double target) {
  if (b < 1) throw std::domain_error("select_flip_size: no eligible blocks");
  if (target < single_extra) return 1;
  target -= single_extra;
  if (m.is_zero()) return 1;
  long last_positive = single_extra > 0.0 ? 1 : 0;
  for (long k = 1; k <= b; ++k) {
    const double r = group_switch_rate(m, b, k);
    if (r > 0.0) last_positive = k;
    if (target < r) return k;
    target -= r;
  }
  return last_positive > 0 ? last_positive : 1;
}

}  // namespace seedbank
