#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seedbank/blockcount.hpp"
#include "seedbank/coalescent.hpp"
#include "seedbank/config.hpp"
#include "seedbank/diffusion.hpp"
#include "seedbank/forward_wf.hpp"
#include "seedbank/mutation_stats.hpp"

namespace seedbank {

/// One comparison of E_{x,y}[X_t^n Y_t^m] against E^{n,m}[x^N_t y^M_t].
struct DualityRow {
  long n = 0, m = 0;
  double x = 0.0, y = 0.0, t = 0.0;
  Estimate lhs, rhs;
  double tolerance = 0.0;  // 3 combined SE + slack

  double diff() const { return lhs.value - rhs.value; }
  bool within() const { return std::abs(diff()) <= tolerance; }
};

/// Duality comparisons over all exponents (n, m) with n, m <= exponent_max,
/// all starts x_values x y_values and all times. The right-hand side is exact
/// without simultaneous switching and Monte Carlo (rhs_reps paths) with it.
inline std::vector<DualityRow> duality_table(const ModelParams& params, long exponent_max,
                                             const std::vector<double>& x_values, const std::vector<double>& y_values,
                                             const std::vector<double>& times, std::size_t reps, double dt,
                                             double eps, std::size_t rhs_reps, double slack, std::uint64_t seed,
                                             unsigned workers) {
  if (times.empty() || !(times.back() > 0.0)) throw std::domain_error("duality: need a positive time");
  std::vector<BlockCountState> exps;
  for (long n = 0; n <= exponent_max; ++n)
    for (long m = 0; m <= exponent_max; ++m)
      if (n + m > 0) exps.push_back({n, m});
  const bool exact = !params.has_simultaneous_switching();

  // rhs[exponent][time]: exact laws or sampled states, reused across starts.
  std::vector<std::vector<TransientDistribution>> laws(exps.size());
  std::vector<std::vector<std::vector<BlockCountState>>> samples(exps.size());
  for (std::size_t e = 0; e < exps.size(); ++e) {
    if (exact) {
      for (double t : times) laws[e].push_back(transient_distribution(exps[e], params, t));
    } else {
      samples[e] = sample_blockcount_states(exps[e], params, times, rhs_reps, seed, workers);
    }
  }

  IntegratorSettings set;
  set.dt = std::min(dt, times.back());
  set.eps = eps;
  set.horizon = times.back();
  set.checkpoints = times;
  std::vector<DualityRow> rows;
  for (double x : x_values) {
    for (double y : y_values) {
      const auto lhs = duality_lhs_grid(params, {x, y}, exps, set, reps, seed, workers);
      for (std::size_t ti = 0; ti < times.size(); ++ti) {
        for (std::size_t e = 0; e < exps.size(); ++e) {
          DualityRow row;
          row.n = exps[e].n;
          row.m = exps[e].m;
          row.x = x;
          row.y = y;
          row.t = times[ti];
          row.lhs = lhs[ti][e];
          if (exact) {
            row.rhs = {laws[e][ti].expectation(x, y), 0.0, 0};
          } else {
            MeanAccumulator acc;
            for (const auto& path : samples[e])
              acc.add(std::pow(x, static_cast<double>(path[ti].n)) * std::pow(y, static_cast<double>(path[ti].m)));
            row.rhs = {acc.mean(), acc.stderr_mean(), acc.count};
          }
          row.tolerance = 3.0 * std::hypot(row.lhs.stderr_mean, row.rhs.stderr_mean) + slack;
          rows.push_back(row);
        }
      }
    }
  }
  return rows;
}

/// Fixation target (y + xK)/(1+K) at the counts a WF run actually starts from.
inline double wf_fixation_target(const WFConfig& cfg, double x, double y) {
  const double xi = static_cast<double>(std::lround(x * static_cast<double>(cfg.N))) / static_cast<double>(cfg.N);
  const double yj = static_cast<double>(std::lround(y * static_cast<double>(cfg.M()))) / static_cast<double>(cfg.M());
  return (yj + xi * cfg.K) / (1.0 + cfg.K);
}

/// Spontaneous exchange plus, when the model has switching measures, rare
/// simultaneous events with r mu = z^-1 Lambda.
inline WFConfig wf_config_from(const ExperimentConfig& cfg) {
  WFConfig wf;
  wf.N = cfg.wf.N;
  wf.K = cfg.model.K;
  wf.c = cfg.model.c;
  wf.exchange = cfg.wf.exchange;
  if (cfg.model.has_simultaneous_switching()) {
    auto [r, mu] = wf_switching_from_measure(cfg.model.lambda_ad);
    auto [r_bar, mu_bar] = wf_switching_from_measure(cfg.model.lambda_da);
    wf.switching = SimultaneousSwitching{r, r_bar, std::move(mu), std::move(mu_bar)};
  }
  wf.validate();
  return wf;
}

/// Files written by one experiment run.
struct RunReport {
  std::vector<std::filesystem::path> files;
  std::string summary;
};

/// Writes CSV and JSON outputs that carry the version, seed and full config.
class OutputWriter {
 public:
  OutputWriter(const ExperimentConfig& cfg, std::filesystem::path dir)
      : cfg_(cfg), dir_(std::move(dir)), config_text_(serialize(cfg)) {
    std::filesystem::create_directories(dir_);
  }

  /// Opens `name` and writes the '#' metadata block and the header row.
  std::ofstream csv(const std::string& name, const std::vector<std::string>& columns) {
    auto os = open(name);
    os << "# seedbank " << kVersion << "\n# experiment = " << cfg_.experiment << "\n# seed = " << cfg_.seed
       << "\n# config:\n";
    std::istringstream lines(config_text_);
    for (std::string line; std::getline(lines, line);) os << "#" << (line.empty() ? "" : " ") << line << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
    os << "\n";
    return os;
  }

  void json(const std::string& name, nlohmann::ordered_json body) {
    nlohmann::ordered_json doc;
    doc["meta"] = meta();
    for (auto& [k, v] : body.items()) doc[k] = v;
    open(name) << doc.dump(2) << "\n";
  }

  nlohmann::ordered_json meta() const {
    return {{"version", kVersion}, {"experiment", cfg_.experiment}, {"seed", cfg_.seed}, {"config", config_text_}};
  }

  std::ofstream open(const std::string& name) {
    const auto path = dir_ / name;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    report.files.push_back(path);
    return os;
  }

  RunReport report;

 private:
  const ExperimentConfig& cfg_;
  std::filesystem::path dir_;
  std::string config_text_;
};

/// Comma-joined row; doubles in shortest round-trip form.
template <class... Ts>
std::string csv_row(const Ts&... values) {
  std::string s;
  auto put = [&](const auto& v) {
    if (!s.empty()) s += ',';
    using V = std::decay_t<decltype(v)>;
    if constexpr (std::is_floating_point_v<V>) s += format_double(v);
    else if constexpr (std::is_arithmetic_v<V>) s += std::to_string(v);
    else s += v;
  };
  (put(values), ...);
  return s + "\n";
}

inline nlohmann::ordered_json to_json(const Estimate& e) {
  return {{"mean", e.value}, {"stderr", e.stderr_mean}, {"samples", e.samples}};
}

inline nlohmann::ordered_json to_json(const MeanAccumulator& a) {
  return {{"mean", a.mean()}, {"stderr", a.stderr_mean()}, {"samples", a.count}};
}

namespace detail {

/// First-step expectations when the lattice is small enough; null otherwise.
inline nlohmann::ordered_json exact_or_null(const BlockCountState& s, const ModelParams& p) {
  if (s.total() > 400) return nullptr;
  const auto r = first_step_analysis(s, p);
  return {{"tmrca", r.tmrca}, {"active_length", r.active_length}, {"dormant_length", r.dormant_length}};
}

}  // namespace detail

inline RunReport run_coalescent(const ExperimentConfig& cfg, unsigned workers) {
  OutputWriter out(cfg, cfg.out);
  const auto& p = cfg.model;
  const auto& num = cfg.numeric;
  struct Rep {
    double tmrca, la, ld;
    std::size_t events;
    std::string newick, log;
  };
  const auto reps = run_replicates(num.reps, workers, [&](std::size_t r) {
    Rng rng = make_stream(cfg.seed, experiment_id("cli-coalescent"), r);
    const auto g = simulate_coalescent(num.n, num.m, p, StopRule::mrca(), rng);
    const auto [la, ld] = branch_lengths(g);
    Rep rep{g.end_time, la, ld, g.events.size(), {}, {}};
    if (r < 10) rep.newick = to_newick(g);
    if (r == 0) {
      std::ostringstream os;
      write_event_log(os, g);
      rep.log = os.str();
    }
    return rep;
  });
  auto csv = out.csv("coalescent.csv", {"rep", "tmrca", "active_length", "dormant_length", "events"});
  MeanAccumulator t, a, d;
  for (std::size_t r = 0; r < reps.size(); ++r) {
    csv << csv_row(r, reps[r].tmrca, reps[r].la, reps[r].ld, reps[r].events);
    t.add(reps[r].tmrca);
    a.add(reps[r].la);
    d.add(reps[r].ld);
  }
  auto trees = out.open("coalescent_trees.nwk");
  for (const auto& rep : reps)
    if (!rep.newick.empty()) trees << rep.newick << "\n";
  auto log = out.open("coalescent_events.jsonl");
  log << nlohmann::ordered_json{{"type", "meta"}, {"meta", out.meta()}, {"replicate", 0}}.dump() << "\n" << reps[0].log;
  out.json("coalescent.json", {{"sample", {{"n", num.n}, {"m", num.m}}},
                               {"tmrca", to_json(t)},
                               {"active_length", to_json(a)},
                               {"dormant_length", to_json(d)},
                               {"exact", detail::exact_or_null({num.n, num.m}, p)}});
  out.report.summary = "mean T_MRCA " + format_double(t.mean()) + " +- " + format_double(t.stderr_mean());
  return std::move(out.report);
}

inline RunReport run_blockcount(const ExperimentConfig& cfg, unsigned workers) {
  OutputWriter out(cfg, cfg.out);
  const auto& p = cfg.model;
  const auto& num = cfg.numeric;
  const BlockCountState s0{num.n, num.m};
  const auto exact = detail::exact_or_null(s0, p);
  Rng rng0 = make_stream(cfg.seed, experiment_id("cli-blockcount-path"), 0);
  const auto path = simulate_blockcount(s0, p, StopRule::mrca(), rng0);
  auto csv = out.csv("blockcount_path.csv", {"t", "n", "m"});
  for (std::size_t k = 0; k < path.times.size(); ++k) csv << csv_row(path.times[k], path.states[k].n, path.states[k].m);
  const RateKernel kernel(p, s0.total());
  const auto times = run_replicates(num.reps, workers, [&](std::size_t r) {
    Rng rng = make_stream(cfg.seed, experiment_id("cli-blockcount"), r);
    return blockcount_absorption_time(s0, kernel, rng);
  });
  const auto acc = accumulate(times, [](double v) { return v; });
  out.json("blockcount.json", {{"start", {{"n", s0.n}, {"m", s0.m}}}, {"tmrca", to_json(acc)}, {"exact", exact}});
  out.report.summary = "mean T_MRCA " + format_double(acc.mean()) + " +- " + format_double(acc.stderr_mean());
  if (!exact.is_null()) out.report.summary += ", first-step " + format_double(exact["tmrca"].get<double>());
  return std::move(out.report);
}

inline RunReport run_forward_wf(const ExperimentConfig& cfg, unsigned workers) {
  OutputWriter out(cfg, cfg.out);
  const auto wf = wf_config_from(cfg);
  const auto& num = cfg.numeric;
  const long every = num.record_every > 0 ? num.record_every : std::max(1L, cfg.wf.generations);
  Rng rng = make_stream(cfg.seed, experiment_id("cli-forward-wf"), 0);
  const auto tr = run_trajectory(wf, num.x, num.y, cfg.wf.generations, every, rng);
  auto csv = out.csv("forward_wf_trajectory.csv", {"generation", "i", "j", "x", "y"});
  for (const auto& s : tr.samples)
    csv << csv_row(s.generation, s.i, s.j, static_cast<double>(s.i) / static_cast<double>(wf.N),
                   static_cast<double>(s.j) / static_cast<double>(wf.M()));
  const auto fix = wf_fixation(wf, num.x, num.y, cfg.wf.generations, num.reps, cfg.seed, workers);
  out.json("forward_wf.json",
           {{"M", wf.M()},
            {"fixation", {{"reps", fix.reps},
                          {"fixed_type0", fix.fixed_type0},
                          {"fixed_type1", fix.fixed_type1},
                          {"unfixed", fix.unfixed},
                          {"frequency", fix.frequency()},
                          {"stderr", fix.stderr_frequency()},
                          {"target", wf_fixation_target(wf, num.x, num.y)}}},
            {"counters", {{"exchange_clamped", fix.exchange_clamped}, {"f_capped", fix.f_capped}}}});
  out.report.summary = "type-0 fixation " + format_double(fix.frequency()) + " (" + std::to_string(fix.unfixed) +
                       " unfixed), target " + format_double(wf_fixation_target(wf, num.x, num.y));
  return std::move(out.report);
}

inline RunReport run_diffusion(const ExperimentConfig& cfg, unsigned workers) {
  OutputWriter out(cfg, cfg.out);
  const auto& p = cfg.model;
  const auto& num = cfg.numeric;
  IntegratorSettings set;
  set.dt = num.dt;
  set.horizon = num.T;
  set.eps = num.eps;
  set.boundary_tol = num.boundary_tol;
  set.record_every = num.record_every;
  const DiffusionState s0{num.x, num.y};
  Rng rng = make_stream(cfg.seed, experiment_id("cli-diffusion"), 0);
  const auto tr = integrate(p, s0, set, rng);
  auto csv = out.csv("diffusion_trajectory.csv", {"t", "x", "y"});
  for (std::size_t k = 0; k < tr.times.size(); ++k) csv << csv_row(tr.times[k], tr.states[k].x, tr.states[k].y);
  auto jumps = out.csv("diffusion_jumps.csv", {"t", "type", "z"});
  for (const auto& j : tr.jumps) jumps << csv_row(j.time, std::string(j.type == JumpType::F ? "F" : "D"), j.z);

  nlohmann::ordered_json body;
  body["trajectory"] = {{"end", {tr.final_state().x, tr.final_state().y}},
                        {"hit_00", tr.hit_00},
                        {"hit_11", tr.hit_11},
                        {"ran_to_horizon", tr.ran_to_horizon},
                        {"jumps", tr.jumps.size()}};
  const bool plain = !p.has_simultaneous_switching() && !p.has_diffusion_mutation();
  if (plain) {
    body["trajectory"]["delay_residual"] = delay_residual(tr, p);
    auto mset = set;
    for (double t : num.times)
      if (t <= num.T) mset.checkpoints.push_back(t);
    if (!mset.checkpoints.empty()) {
      const auto mart = martingale_drift(p, s0, mset, num.reps, cfg.seed, workers);
      auto arr = nlohmann::ordered_json::array();
      for (std::size_t k = 0; k < mart.size(); ++k)
        arr.push_back({{"t", mset.checkpoints[k]}, {"K_X_plus_Y", to_json(mart[k])}});
      body["martingale"] = {{"target", p.K * num.x + num.y}, {"checkpoints", arr}};
    }
    auto fset = set;
    fset.boundary_tol = num.fixation_tol;
    const auto fix = diffusion_fixation(p, s0, fset, num.reps, cfg.seed, workers);
    body["fixation"] = {{"reps", fix.reps},      {"hit_11", fix.hit_11},
                        {"hit_00", fix.hit_00},  {"unfixed", fix.unfixed},
                        {"frequency", fix.frequency()}, {"stderr", fix.stderr_frequency()},
                        {"target", (num.y + num.x * p.K) / (1.0 + p.K)}, {"tolerance", num.fixation_tol}};
  }
  if (num.x > 0.0 && num.x < 1.0 && num.y > 0.0 && num.y < 1.0) {
    const auto [h, h2] = boundary_hitting_stats(p, s0, set, num.reps, cfg.seed, workers);
    auto freq = [](const HitFrequencies& f) {
      return nlohmann::ordered_json{{"dt", f.dt},           {"reps", f.reps},         {"x_hits_0", f.x_hits_0()},
                                    {"x_hits_1", f.x_hits_1()}, {"y_hits_0", f.y_hits_0()}, {"y_hits_1", f.y_hits_1()}};
    };
    body["boundary_hits"] = {freq(h), freq(h2)};
  }
  out.json("diffusion.json", body);
  out.report.summary = "end state (" + format_double(tr.final_state().x) + ", " + format_double(tr.final_state().y) +
                       "), " + std::to_string(tr.jumps.size()) + " jumps";
  return std::move(out.report);
}

inline RunReport run_duality(const ExperimentConfig& cfg, unsigned workers) {
  OutputWriter out(cfg, cfg.out);
  const auto& num = cfg.numeric;
  const auto rows = duality_table(cfg.model, num.exponent_max, num.x_values, num.y_values, num.times, num.reps, num.dt,
                                  num.eps, num.rhs_reps, 0.01, cfg.seed, workers);
  auto csv = out.csv("duality.csv", {"n", "m", "x", "y", "t", "lhs", "lhs_se", "rhs", "rhs_se", "diff", "tolerance", "within"});
  std::size_t inside = 0;
  for (const auto& r : rows) {
    csv << csv_row(r.n, r.m, r.x, r.y, r.t, r.lhs.value, r.lhs.stderr_mean, r.rhs.value, r.rhs.stderr_mean, r.diff(),
                   r.tolerance, r.within() ? 1 : 0);
    inside += r.within();
  }
  out.report.summary = std::to_string(inside) + " of " + std::to_string(rows.size()) + " rows within 3 SE + 0.01";
  return std::move(out.report);
}

inline RunReport run_tmrca_scan(const ExperimentConfig& cfg, unsigned workers) {
  OutputWriter out(cfg, cfg.out);
  const auto rows = tmrca_loglog_scan(cfg.model, cfg.numeric.n_list, cfg.numeric.reps, cfg.seed, workers);
  auto csv = out.csv("tmrca_scan.csv", {"n", "mean_tmrca", "stderr", "mean_over_loglog_n"});
  for (const auto& r : rows) csv << csv_row(r.n, r.mean, r.stderr_mean, r.ratio);
  out.report.summary = std::to_string(rows.size()) + " sample sizes";
  return std::move(out.report);
}

inline RunReport run_coming_down_scan(const ExperimentConfig& cfg, unsigned workers) {
  OutputWriter out(cfg, cfg.out);
  const auto rows =
      coming_down_scan(cfg.model, cfg.numeric.n_list, cfg.numeric.t_probe, cfg.numeric.reps, cfg.seed, workers);
  auto csv = out.csv("coming_down_scan.csv", {"n", "mean_lines", "stderr", "ratio_to_previous"});
  for (const auto& r : rows) csv << csv_row(r.n, r.mean, r.stderr_mean, r.ratio);
  out.report.summary = std::to_string(rows.size()) + " sample sizes at t = " + format_double(cfg.numeric.t_probe);
  // Starts with a huge seed bank only come down through an atom at 1.
  if (mass_at_one(cfg.model.lambda_da) > 0.0) {
    const auto dormant = coming_down_scan_dormant(cfg.model, cfg.numeric.n, cfg.numeric.n_list, cfg.numeric.t_probe,
                                                  cfg.numeric.reps, cfg.seed, workers);
    auto dcsv = out.csv("coming_down_dormant.csv", {"m", "mean_lines", "stderr", "ratio_to_previous"});
    for (const auto& r : dormant) dcsv << csv_row(r.n, r.mean, r.stderr_mean, r.ratio);
    out.report.summary += "; dormant-start scan from n = " + std::to_string(cfg.numeric.n) + " (heuristic)";
  }
  return std::move(out.report);
}

inline RunReport run_stats(const ExperimentConfig& cfg, unsigned workers) {
  OutputWriter out(cfg, cfg.out);
  const auto& p = cfg.model;
  const auto& num = cfg.numeric;
  const auto spectra = run_replicates(num.reps, workers, [&](std::size_t r) {
    Rng rng = make_stream(cfg.seed, experiment_id("cli-stats"), r);
    const auto g = simulate_coalescent(num.n, num.m, p, StopRule::mrca(), rng);
    return sfs(g, drop_mutations(g, p.u_active, p.u_dormant, rng));
  });
  auto csv = out.csv("stats.csv", {"rep", "segregating_sites", "singletons", "theta_pi", "theta_h", "fay_wu_h",
                                   "fu_li_d_numerator"});
  MeanAccumulator seg, single, pi, h, fw, fl;
  const auto n = static_cast<std::size_t>(num.n + num.m);
  std::vector<double> mean_sfs(n > 1 ? n - 1 : 0, 0.0);
  for (std::size_t r = 0; r < spectra.size(); ++r) {
    const auto& s = spectra[r];
    csv << csv_row(r, segregating_sites(s), singletons(s), theta_pi(s), theta_h(s), fay_wu_h(s), fu_li_d_numerator(s));
    seg.add(static_cast<double>(segregating_sites(s)));
    single.add(static_cast<double>(singletons(s)));
    pi.add(theta_pi(s));
    h.add(theta_h(s));
    fw.add(fay_wu_h(s));
    fl.add(fu_li_d_numerator(s));
    for (std::size_t i = 0; i < mean_sfs.size(); ++i) mean_sfs[i] += static_cast<double>(s.counts[i]);
  }
  for (auto& v : mean_sfs) v /= static_cast<double>(spectra.size());
  std::vector<std::string> columns{"n"};
  for (std::size_t i = 1; i < n; ++i) columns.push_back("xi_" + std::to_string(i));
  auto sfs_csv = out.csv("stats_sfs.csv", columns);
  for (const auto& s : spectra) {
    sfs_csv << s.n;
    for (long c : s.counts) sfs_csv << ',' << c;
    sfs_csv << '\n';
  }
  nlohmann::ordered_json oracle = nullptr;
  if (const auto exact = detail::exact_or_null({num.n, num.m}, p); !exact.is_null())
    oracle = 0.5 * p.u_active * exact["active_length"].get<double>() +
             0.5 * p.u_dormant * exact["dormant_length"].get<double>();
  out.json("stats.json", {{"segregating_sites", to_json(seg)},
                          {"expected_segregating_sites", oracle},
                          {"singletons", to_json(single)},
                          {"theta_pi", to_json(pi)},
                          {"theta_h", to_json(h)},
                          {"fay_wu_h", to_json(fw)},
                          {"fu_li_d_numerator", to_json(fl)},
                          {"mean_sfs", mean_sfs}});
  out.report.summary = "mean segregating sites " + format_double(seg.mean()) + " +- " + format_double(seg.stderr_mean());
  return std::move(out.report);
}

/// Dispatches on cfg.experiment.
inline RunReport run_experiment(const ExperimentConfig& cfg, unsigned workers) {
  cfg.model.validate();
  const auto& e = cfg.experiment;
  if (e == "coalescent") return run_coalescent(cfg, workers);
  if (e == "blockcount") return run_blockcount(cfg, workers);
  if (e == "forward-wf") return run_forward_wf(cfg, workers);
  if (e == "diffusion") return run_diffusion(cfg, workers);
  if (e == "duality") return run_duality(cfg, workers);
  if (e == "tmrca-scan") return run_tmrca_scan(cfg, workers);
  if (e == "coming-down-scan") return run_coming_down_scan(cfg, workers);
  if (e == "stats") return run_stats(cfg, workers);
  throw std::domain_error("unknown experiment '" + e + "'");
}

}  // namespace seedbank
