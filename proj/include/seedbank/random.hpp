#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string_view>

namespace seedbank {

/// Engine used by every simulator in the library.
using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// FNV-1a hash, used to turn experiment names into stream identifiers.
constexpr std::uint64_t experiment_id(std::string_view name) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char ch : name) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed of the stream owned by replicate `replicate` of experiment `experiment`.
///
/// stream = splitmix64(splitmix64(splitmix64(master) ^ experiment) ^ replicate).
/// Each replicate's randomness depends only on this triple, so results do not
/// depend on how replicates are scheduled across workers.
constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t experiment,
                                    std::uint64_t replicate) noexcept {
  return splitmix64(splitmix64(splitmix64(master) ^ experiment) ^ replicate);
}

inline Rng make_stream(std::uint64_t master, std::uint64_t experiment, std::uint64_t replicate) {
  return Rng(stream_seed(master, experiment, replicate));
}

inline double uniform01(Rng& rng) {
  return std::generate_canonical<double, 53>(rng);
}

/// Uniform index in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  const auto i = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
  return i < n ? i : n - 1;
}

inline double exponential(Rng& rng, double rate) {
  return std::exponential_distribution<double>(rate)(rng);
}

inline long binomial(Rng& rng, long trials, double p) {
  if (trials <= 0 || p <= 0.0) return 0;
  if (p >= 1.0) return trials;
  return std::binomial_distribution<long>(trials, p)(rng);
}

/// Number of marked items in `draws` draws without replacement from an urn of
/// `population` items, `marked` of which are marked.
///
/// Sequential urn simulation over min(draws, population - draws) draws; the
/// populations in this library are small enough that this is never the
/// bottleneck.
inline long hypergeometric(Rng& rng, long draws, long marked, long population) {
  if (draws < 0 || marked < 0 || population < 0 || draws > population || marked > population)
    throw std::domain_error("hypergeometric: invalid urn");
  if (draws == 0 || marked == 0) return 0;
  if (marked == population) return draws;
  const bool complement = draws > population / 2;
  long k = complement ? population - draws : draws;
  long good = marked;
  long total = population;
  long hits = 0;
  for (; k > 0; --k) {
    if (uniform01(rng) * static_cast<double>(total) < static_cast<double>(good)) {
      ++hits;
      --good;
    }
    --total;
  }
  return complement ? marked - hits : hits;
}

}  // namespace seedbank
