#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "seedbank/coalescent.hpp"
#include "seedbank/random.hpp"

namespace seedbank {

/// One infinite-sites mutation.
struct Mutation {
  long block = 0;
  double time = 0.0;
  Mark mark = Mark::active;
  long leaf_count = 0;
};

struct MutationSet {
  long sample_size = 0;
  std::vector<Mutation> mutations;
};

/// Places Poisson numbers of mutations on each constant-mark segment, at rate
/// u_active/2 on active and u_dormant/2 on dormant segments. Nothing is placed
/// above the MRCA.
inline MutationSet drop_mutations(const Genealogy& g, double u_active, double u_dormant, Rng& rng) {
  if (!g.reached_mrca) throw std::domain_error("drop_mutations: genealogy did not reach the MRCA");
  if (!(u_active >= 0.0) || !(u_dormant >= 0.0)) throw std::domain_error("drop_mutations: rates must be nonnegative");
  const auto r = replay(g);
  MutationSet out;
  out.sample_size = g.initial.sample_size();
  for (const auto& seg : r.segments) {
    const double rate = 0.5 * (seg.mark == Mark::active ? u_active : u_dormant);
    const double mean = rate * (seg.end - seg.start);
    if (mean <= 0.0) continue;
    const long k = std::poisson_distribution<long>(mean)(rng);
    const auto leaves = static_cast<long>(r.leaves[static_cast<std::size_t>(seg.block)].size());
    for (long i = 0; i < k; ++i)
      out.mutations.push_back({seg.block, seg.start + uniform01(rng) * (seg.end - seg.start), seg.mark, leaves});
  }
  return out;
}

inline MutationSet drop_mutations(const Genealogy& g, double u_active, double u_dormant, std::uint64_t seed) {
  Rng rng = make_stream(seed, experiment_id("mutations"), 0);
  return drop_mutations(g, u_active, u_dormant, rng);
}

/// xi_i = number of mutations carried by exactly i of n sampled leaves, i = 1..n-1.
struct SiteFrequencySpectrum {
  long n = 0;
  std::vector<long> counts;

  SiteFrequencySpectrum() = default;
  SiteFrequencySpectrum(long sample_size, std::vector<long> xi) : n(sample_size), counts(std::move(xi)) {
    if (n < 2) throw std::domain_error("SFS needs a sample of at least 2");
    if (counts.size() != static_cast<std::size_t>(n - 1)) throw std::domain_error("SFS needs n - 1 entries");
    for (long c : counts)
      if (c < 0) throw std::domain_error("SFS entries must be nonnegative");
  }
  long operator[](long i) const { return counts[static_cast<std::size_t>(i - 1)]; }
};

inline SiteFrequencySpectrum sfs(const Genealogy& g, const MutationSet& muts) {
  const long n = g.initial.sample_size();
  std::vector<long> xi(static_cast<std::size_t>(std::max(n - 1, 0L)), 0);
  for (const auto& mu : muts.mutations) {
    if (mu.leaf_count < 1 || mu.leaf_count > n - 1) throw std::domain_error("sfs: mutation is not segregating");
    ++xi[static_cast<std::size_t>(mu.leaf_count - 1)];
  }
  return {n, std::move(xi)};
}

inline long segregating_sites(const SiteFrequencySpectrum& s) {
  long total = 0;
  for (long c : s.counts) total += c;
  return total;
}

inline long singletons(const SiteFrequencySpectrum& s) { return s.counts.empty() ? 0 : s.counts.front(); }

inline double theta_pi(const SiteFrequencySpectrum& s) {
  const double n = static_cast<double>(s.n);
  double acc = 0.0;
  for (long i = 1; i < s.n; ++i) acc += static_cast<double>(i) * (n - static_cast<double>(i)) * static_cast<double>(s[i]);
  return acc / (0.5 * n * (n - 1.0));
}

inline double theta_h(const SiteFrequencySpectrum& s) {
  const double n = static_cast<double>(s.n);
  double acc = 0.0;
  for (long i = 1; i < s.n; ++i) acc += static_cast<double>(i) * static_cast<double>(i) * static_cast<double>(s[i]);
  return acc / (0.5 * n * (n - 1.0));
}

/// Fay and Wu's H, unnormalized: theta_pi - theta_H.
inline double fay_wu_h(const SiteFrequencySpectrum& s) { return theta_pi(s) - theta_h(s); }

/// Numerator of Fu and Li's D: S - a_n xi_1 with a_n = sum_{i<n} 1/i.
inline double fu_li_d_numerator(const SiteFrequencySpectrum& s) {
  double a_n = 0.0;
  for (long i = 1; i < s.n; ++i) a_n += 1.0 / static_cast<double>(i);
  return static_cast<double>(segregating_sites(s)) - a_n * static_cast<double>(singletons(s));
}

}  // namespace seedbank
