#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "seedbank/blockcount.hpp"
#include "seedbank/measures.hpp"
#include "seedbank/random.hpp"
#include "seedbank/rates.hpp"

namespace seedbank {

enum class Mark : std::uint8_t { active, dormant };

inline const char* to_string(Mark m) { return m == Mark::active ? "active" : "dormant"; }

struct Block {
  std::vector<int> leaves;  // sorted labels
  Mark mark = Mark::active;
  friend bool operator==(const Block&, const Block&) = default;
};

/// Blocks partitioning the leaf labels {1..k}, each tagged active or dormant.
struct MarkedPartition {
  std::vector<Block> blocks;

  /// n active then m dormant singletons, labelled 1..n+m.
  static MarkedPartition singletons(long n, long m) {
    MarkedPartition p;
    for (long i = 0; i < n + m; ++i) p.blocks.push_back({{static_cast<int>(i + 1)}, i < n ? Mark::active : Mark::dormant});
    return p;
  }

  long sample_size() const {
    long k = 0;
    for (const auto& b : blocks) k += static_cast<long>(b.leaves.size());
    return k;
  }
  long count(Mark m) const {
    return static_cast<long>(std::count_if(blocks.begin(), blocks.end(), [m](const Block& b) { return b.mark == m; }));
  }

  /// Throws std::domain_error unless the blocks are nonempty, disjoint and cover {1..k}.
  void validate() const {
    const long k = sample_size();
    std::vector<char> seen(static_cast<std::size_t>(k) + 1, 0);
    for (const auto& b : blocks) {
      if (b.leaves.empty()) throw std::domain_error("marked partition has an empty block");
      for (int leaf : b.leaves) {
        if (leaf < 1 || leaf > k || seen[static_cast<std::size_t>(leaf)])
          throw std::domain_error("marked partition blocks must be disjoint and cover 1..k");
        seen[static_cast<std::size_t>(leaf)] = 1;
      }
    }
  }

  friend bool operator==(const MarkedPartition&, const MarkedPartition&) = default;
};

/// Backward-in-time event. Block ids: initial blocks are 0..B-1 in the order
/// of the initial partition; the j-th merge creates block B + j.
struct GenealogyEvent {
  double time = 0.0;
  EventKind kind = EventKind::merge;
  std::vector<long> blocks;  // merged pair, or the flipped set
  long created = -1;         // merges only
};

struct Genealogy {
  MarkedPartition initial;
  std::vector<GenealogyEvent> events;
  double end_time = 0.0;
  bool reached_mrca = false;

  long initial_blocks() const { return static_cast<long>(initial.blocks.size()); }
};

/// Aggregate rates out of a marked partition; `deactivate[j-1]` is the total
/// rate of flipping some j active blocks (similarly `activate`).
struct PartitionRates {
  double merge = 0.0;
  std::vector<double> deactivate;
  std::vector<double> activate;

  double total() const {
    double t = merge;
    for (double r : deactivate) t += r;
    for (double r : activate) t += r;
    return t;
  }
};

inline PartitionRates partition_transition_rates(long a, long d, const ModelParams& p) {
  PartitionRates r;
  r.merge = RateKernel::merge_rate(a);
  for (long j = 1; j <= a; ++j)
    r.deactivate.push_back(group_switch_rate(p.lambda_ad, a, j) + (j == 1 ? p.c * static_cast<double>(a) : 0.0));
  for (long j = 1; j <= d; ++j)
    r.activate.push_back(group_switch_rate(p.lambda_da, d, j) + (j == 1 ? p.c * p.K * static_cast<double>(d) : 0.0));
  return r;
}

inline PartitionRates partition_transition_rates(const MarkedPartition& state, const ModelParams& p) {
  state.validate();
  return partition_transition_rates(state.count(Mark::active), state.count(Mark::dormant), p);
}

namespace detail {

/// Moves a uniform `j`-subset of `pool` to its tail (partial Fisher-Yates) and returns it.
inline std::vector<long> take_subset(std::vector<long>& pool, long j, Rng& rng) {
  const std::size_t size = pool.size();
  for (std::size_t i = 0; i < static_cast<std::size_t>(j); ++i) {
    const std::size_t last = size - 1 - i;
    const std::size_t pick = uniform_index(rng, last + 1);
    std::swap(pool[pick], pool[last]);
  }
  std::vector<long> out(pool.end() - j, pool.end());
  pool.resize(size - static_cast<std::size_t>(j));
  return out;
}

}  // namespace detail

/// Gillespie simulation of the seed bank coalescent from a marked partition.
inline Genealogy simulate_coalescent(const MarkedPartition& start, const ModelParams& params, const StopRule& stop,
                                     Rng& rng) {
  start.validate();
  if (start.blocks.empty()) throw std::domain_error("simulate_coalescent: need at least one block");
  if (!stop.at_mrca && !std::isfinite(stop.horizon))
    throw std::domain_error("simulate_coalescent: a horizon-only stop needs a finite horizon");
  Genealogy g;
  g.initial = start;
  std::vector<long> active, dormant;
  for (std::size_t i = 0; i < start.blocks.size(); ++i)
    (start.blocks[i].mark == Mark::active ? active : dormant).push_back(static_cast<long>(i));
  long next_id = static_cast<long>(start.blocks.size());
  const RateKernel kernel(params, next_id);

  double t = 0.0;
  for (;;) {
    const long a = static_cast<long>(active.size());
    const long d = static_cast<long>(dormant.size());
    if (stop.at_mrca && a + d == 1) {
      g.reached_mrca = true;
      break;
    }
    const double q = kernel.total(a, d);
    if (q <= 0.0) {
      if (stop.at_mrca)
        throw std::domain_error("MRCA unreachable: dormant lines can never reactivate (c = 0 and no dormant->active switching)");
      t = stop.horizon;
      break;
    }
    const double wait = exponential(rng, q);
    if (t + wait > stop.horizon) {
      t = stop.horizon;
      break;
    }
    t += wait;
    const auto ev = select_event(kernel, a, d, uniform01(rng) * q);
    GenealogyEvent rec;
    rec.time = t;
    rec.kind = ev.kind;
    switch (ev.kind) {
      case EventKind::merge: {
        rec.blocks = detail::take_subset(active, 2, rng);
        rec.created = next_id++;
        active.push_back(rec.created);
        break;
      }
      case EventKind::to_dormant:
        rec.blocks = detail::take_subset(active, ev.size, rng);
        dormant.insert(dormant.end(), rec.blocks.begin(), rec.blocks.end());
        break;
      case EventKind::to_active:
        rec.blocks = detail::take_subset(dormant, ev.size, rng);
        active.insert(active.end(), rec.blocks.begin(), rec.blocks.end());
        break;
    }
    g.events.push_back(std::move(rec));
  }
  g.end_time = t;
  return g;
}

/// Seed bank coalescent from n active and m dormant singletons.
inline Genealogy simulate_coalescent(long n, long m, const ModelParams& params, const StopRule& stop, Rng& rng) {
  if (n < 0 || m < 0 || n + m < 1) throw std::domain_error("simulate_coalescent: need n + m >= 1");
  return simulate_coalescent(MarkedPartition::singletons(n, m), params, stop, rng);
}

inline Genealogy simulate_coalescent(long n, long m, const ModelParams& params, const StopRule& stop,
                                     std::uint64_t seed) {
  Rng rng = make_stream(seed, experiment_id("coalescent"), 0);
  return simulate_coalescent(n, m, params, stop, rng);
}

inline std::optional<double> tmrca(const Genealogy& g) {
  if (!g.reached_mrca) return std::nullopt;
  return g.events.empty() ? 0.0 : g.events.back().time;
}

/// A maximal stretch of one block's life with a constant mark.
struct Segment {
  long block = 0;
  double start = 0.0;
  double end = 0.0;
  Mark mark = Mark::active;
};

/// Replays the event log, checking every partition invariant.
///
/// Produces the leaf set of every block id and its constant-mark segments.
/// The segment of the final block after the MRCA is not produced; on a
/// horizon stop, surviving blocks contribute segments up to end_time.
struct Replay {
  std::vector<std::vector<int>> leaves;  // by block id
  std::vector<Segment> segments;
  MarkedPartition final_partition;
};

inline Replay replay(const Genealogy& g) {
  g.initial.validate();
  Replay out;
  const std::size_t initial = g.initial.blocks.size();
  std::vector<char> alive(initial, 1);
  std::vector<Mark> mark(initial);
  std::vector<double> since(initial, 0.0);
  for (std::size_t i = 0; i < initial; ++i) {
    out.leaves.push_back(g.initial.blocks[i].leaves);
    mark[i] = g.initial.blocks[i].mark;
  }
  auto check_id = [&](long id) -> std::size_t {
    if (id < 0 || static_cast<std::size_t>(id) >= alive.size() || !alive[static_cast<std::size_t>(id)])
      throw std::logic_error("genealogy references a block that is not alive: " + std::to_string(id));
    return static_cast<std::size_t>(id);
  };
  auto close = [&](std::size_t id, double t) {
    if (t > since[id]) out.segments.push_back({static_cast<long>(id), since[id], t, mark[id]});
    since[id] = t;
  };
  double last = -1.0;
  for (const auto& ev : g.events) {
    if (ev.time < 0.0 || !(ev.time > last)) throw std::logic_error("genealogy event times must be strictly increasing");
    last = ev.time;
    if (ev.blocks.empty()) throw std::logic_error("genealogy event with no blocks");
    switch (ev.kind) {
      case EventKind::merge: {
        if (ev.blocks.size() != 2 || ev.blocks[0] == ev.blocks[1]) throw std::logic_error("merge needs two distinct blocks");
        if (ev.created != static_cast<long>(alive.size())) throw std::logic_error("merge created an out-of-order block id");
        std::vector<int> merged;
        for (long id : ev.blocks) {
          const auto i = check_id(id);
          if (mark[i] != Mark::active) throw std::logic_error("dormant block in a merge");
          close(i, ev.time);
          alive[i] = 0;
          merged.insert(merged.end(), out.leaves[i].begin(), out.leaves[i].end());
        }
        std::sort(merged.begin(), merged.end());
        out.leaves.push_back(std::move(merged));
        alive.push_back(1);
        mark.push_back(Mark::active);
        since.push_back(ev.time);
        break;
      }
      case EventKind::to_dormant:
      case EventKind::to_active: {
        const Mark from = ev.kind == EventKind::to_dormant ? Mark::active : Mark::dormant;
        std::vector<long> sorted = ev.blocks;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
          throw std::logic_error("flip event lists a block twice");
        for (long id : ev.blocks) {
          const auto i = check_id(id);
          if (mark[i] != from) throw std::logic_error("flip event applied to a block with the wrong mark");
          close(i, ev.time);
          mark[i] = from == Mark::active ? Mark::dormant : Mark::active;
        }
        break;
      }
    }
  }
  std::size_t survivors = 0;
  for (std::size_t i = 0; i < alive.size(); ++i) {
    if (!alive[i]) continue;
    ++survivors;
    out.final_partition.blocks.push_back({out.leaves[i], mark[i]});
    if (!g.reached_mrca) close(i, g.end_time);
  }
  if (g.reached_mrca && survivors != 1) throw std::logic_error("genealogy marked as reaching the MRCA has several blocks");
  return out;
}

/// (active line-time, dormant line-time) up to the MRCA or horizon.
inline std::pair<double, double> branch_lengths(const Genealogy& g) {
  long a = g.initial.count(Mark::active);
  long d = g.initial.count(Mark::dormant);
  double la = 0.0, ld = 0.0, t = 0.0;
  for (const auto& ev : g.events) {
    la += static_cast<double>(a) * (ev.time - t);
    ld += static_cast<double>(d) * (ev.time - t);
    t = ev.time;
    const long k = static_cast<long>(ev.blocks.size());
    switch (ev.kind) {
      case EventKind::merge: a -= 1; break;
      case EventKind::to_dormant: a -= k; d += k; break;
      case EventKind::to_active: a += k; d -= k; break;
    }
  }
  if (!g.reached_mrca) {
    la += static_cast<double>(a) * (g.end_time - t);
    ld += static_cast<double>(d) * (g.end_time - t);
  }
  return {la, ld};
}

/// Block-count path induced by a genealogy.
inline BlockCountPath project_blockcount(const Genealogy& g) {
  BlockCountPath path;
  BlockCountState s{g.initial.count(Mark::active), g.initial.count(Mark::dormant)};
  path.times.push_back(0.0);
  path.states.push_back(s);
  for (const auto& ev : g.events) {
    const long k = static_cast<long>(ev.blocks.size());
    switch (ev.kind) {
      case EventKind::merge: s.n -= 1; break;
      case EventKind::to_dormant: s.n -= k; s.m += k; break;
      case EventKind::to_active: s.n += k; s.m -= k; break;
    }
    path.times.push_back(ev.time);
    path.states.push_back(s);
  }
  path.reached_mrca = g.reached_mrca;
  path.end_time = g.end_time;
  return path;
}

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::merge: return "merge";
    case EventKind::to_dormant: return "to_dormant";
    case EventKind::to_active: return "to_active";
  }
  return "?";
}

/// Line-delimited JSON event log: one "initial" record, one record per event,
/// then one "end" record.
inline void write_event_log(std::ostream& os, const Genealogy& g) {
  using nlohmann::json;
  json init = {{"record", "initial"}, {"blocks", json::array()}};
  for (std::size_t i = 0; i < g.initial.blocks.size(); ++i) {
    const auto& b = g.initial.blocks[i];
    init["blocks"].push_back({{"id", i}, {"leaves", b.leaves}, {"mark", to_string(b.mark)}});
  }
  os << init.dump() << '\n';
  for (const auto& ev : g.events) {
    json rec = {{"record", "event"}, {"time", ev.time}, {"kind", to_string(ev.kind)}, {"blocks", ev.blocks}};
    if (ev.kind == EventKind::merge) rec["created"] = ev.created;
    os << rec.dump() << '\n';
  }
  os << json{{"record", "end"}, {"end_time", g.end_time}, {"reached_mrca", g.reached_mrca}}.dump() << '\n';
}

/// Newick string of the merge tree with branch lengths (marks are omitted).
/// Requires a genealogy that reached its MRCA.
inline std::string to_newick(const Genealogy& g) {
  if (!g.reached_mrca) throw std::domain_error("to_newick: genealogy did not reach the MRCA");
  const auto B = static_cast<std::size_t>(g.initial_blocks());
  std::vector<std::pair<long, long>> children(B, {-1, -1});
  std::vector<double> height(B, 0.0);
  for (const auto& ev : g.events) {
    if (ev.kind != EventKind::merge) continue;
    children.push_back({ev.blocks[0], ev.blocks[1]});
    height.push_back(ev.time);
  }
  std::ostringstream os;
  os.precision(17);
  auto emit = [&](auto&& self, std::size_t id) -> void {
    if (id < B) {
      const auto& leaves = g.initial.blocks[id].leaves;
      for (std::size_t i = 0; i < leaves.size(); ++i) os << (i ? "_" : "") << leaves[i];
    } else {
      const auto [l, r] = children[id];
      os << '(';
      self(self, static_cast<std::size_t>(l));
      os << ':' << height[id] - height[static_cast<std::size_t>(l)] << ',';
      self(self, static_cast<std::size_t>(r));
      os << ':' << height[id] - height[static_cast<std::size_t>(r)] << ')';
    }
  };
  emit(emit, children.size() - 1);
  os << ';';
  return os.str();
}

}  // namespace seedbank
