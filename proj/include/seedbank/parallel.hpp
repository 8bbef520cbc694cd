#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

namespace seedbank {

/// Environment variable consulted for the default worker count.
inline constexpr const char* kWorkersEnv = "SEEDBANK_WORKERS";

/// Worker count from SEEDBANK_WORKERS, else 1.
inline unsigned default_workers() {
  if (const char* env = std::getenv(kWorkersEnv)) {
    try {
      const long w = std::stol(env);
      if (w > 0) return static_cast<unsigned>(w);
    } catch (...) {
    }
  }
  return 1;
}

/// Runs `body(r)` for r = 0..reps-1 and returns the results indexed by r.
///
/// Replicates are claimed dynamically by `workers` threads. Because each
/// replicate seeds its own stream from r, and results are stored by index,
/// the output is identical for any worker count.
template <class Body>
auto run_replicates(std::size_t reps, unsigned workers, Body&& body)
    -> std::vector<std::invoke_result_t<Body&, std::size_t>> {
  using Result = std::invoke_result_t<Body&, std::size_t>;
  std::vector<Result> out(reps);
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(reps, 1))));
  if (workers == 1) {
    for (std::size_t r = 0; r < reps; ++r) out[r] = body(r);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t r = next.fetch_add(1);
      if (r >= reps) return;
      try {
        out[r] = body(r);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(reps);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

/// Sum / sum-of-squares accumulator. Merging is exact for counts and
/// associative up to floating point; callers reduce in replicate order.
struct MeanAccumulator {
  std::size_t count = 0;
  double sum = 0.0;
  double sum_sq = 0.0;

  void add(double v) {
    ++count;
    sum += v;
    sum_sq += v * v;
  }
  void merge(const MeanAccumulator& o) {
    count += o.count;
    sum += o.sum;
    sum_sq += o.sum_sq;
  }
  double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
  double variance() const {
    if (count < 2) return 0.0;
    const double n = static_cast<double>(count);
    const double m = sum / n;
    return std::max(0.0, (sum_sq - n * m * m) / (n - 1.0));
  }
  /// Standard error of the mean.
  double stderr_mean() const {
    return count ? std::sqrt(variance() / static_cast<double>(count)) : 0.0;
  }
};

template <class Range, class Proj>
MeanAccumulator accumulate(const Range& values, Proj proj) {
  MeanAccumulator acc;
  for (const auto& v : values) acc.add(static_cast<double>(proj(v)));
  return acc;
}

}  // namespace seedbank
