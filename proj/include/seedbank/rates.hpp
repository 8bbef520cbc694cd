#pragma once

#include <algorithm>
#include <limits>

#include "seedbank/measures.hpp"

namespace seedbank {

/// When a backward-in-time simulation stops.
struct StopRule {
  bool at_mrca = true;
  double horizon = std::numeric_limits<double>::infinity();

  static StopRule mrca() { return {}; }
  static StopRule until(double T) { return {false, T}; }
};

/// Event rates shared by the partition-valued coalescent and its block
/// counting process, for configurations of at most `max_blocks` blocks.
///
/// With a active and d dormant blocks:
///   merge        C(a, 2)
///   deactivate   c*a + sum_k group_switch_rate(lambda_ad, a, k)
///   activate     c*K*d + sum_l group_switch_rate(lambda_da, d, l)
class RateKernel {
 public:
  RateKernel(const ModelParams& params, long max_blocks)
      : params_(params), ad_(params.lambda_ad, max_blocks), da_(params.lambda_da, max_blocks) {
    params_.validate();
  }

  const ModelParams& params() const noexcept { return params_; }

  static double merge_rate(long a) { return a >= 2 ? 0.5 * static_cast<double>(a) * static_cast<double>(a - 1) : 0.0; }
  double spontaneous_deactivation(long a) const { return params_.c * static_cast<double>(a); }
  double spontaneous_activation(long d) const { return params_.c * params_.K * static_cast<double>(d); }
  double deactivation_total(long a) const { return spontaneous_deactivation(a) + ad_(a); }
  double activation_total(long d) const { return spontaneous_activation(d) + da_(d); }
  double total(long a, long d) const { return merge_rate(a) + deactivation_total(a) + activation_total(d); }

  /// Flip size for a deactivation event; `target` in [0, deactivation_total(a)).
  long deactivation_size(long a, double target) const {
    return select_flip_size(params_.lambda_ad, a, spontaneous_deactivation(a), target);
  }
  /// Flip size for an activation event; `target` in [0, activation_total(d)).
  long activation_size(long d, double target) const {
    return select_flip_size(params_.lambda_da, d, spontaneous_activation(d), target);
  }

 private:
  ModelParams params_;
  SwitchRateTable ad_;
  SwitchRateTable da_;
};

/// Category of a backward-in-time event.
enum class EventKind { merge, to_dormant, to_active };

/// Outcome of selecting an event with one uniform draw in fixed category
/// order: merge, deactivation sizes 1..a, activation sizes 1..d.
struct SelectedEvent {
  EventKind kind = EventKind::merge;
  long size = 1;
};

inline SelectedEvent select_event(const RateKernel& kernel, long a, long d, double u_times_total) {
  double target = u_times_total;
  const double merge = RateKernel::merge_rate(a);
  const double deact = kernel.deactivation_total(a);
  const double act = kernel.activation_total(d);
  if (target < merge || (deact <= 0.0 && act <= 0.0)) return {EventKind::merge, 2};
  target -= merge;
  if (act <= 0.0 || (deact > 0.0 && target < deact))
    return {EventKind::to_dormant, kernel.deactivation_size(a, target)};
  target = std::max(0.0, target - deact);
  return {EventKind::to_active, kernel.activation_size(d, target)};
}

}  // namespace seedbank
