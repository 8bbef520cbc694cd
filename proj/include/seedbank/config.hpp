#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "seedbank/forward_wf.hpp"
#include "seedbank/measures.hpp"

namespace seedbank {

inline constexpr const char* kVersion = "0.1.0";

inline constexpr std::array<std::string_view, 8> kExperiments{
    "coalescent", "blockcount", "forward-wf", "diffusion", "duality", "tmrca-scan", "coming-down-scan", "stats"};

struct NumericSettings {
  std::size_t reps = 1000;
  double dt = 1e-3;
  double T = 1.0;
  double eps = 1e-3;
  double boundary_tol = 0.0;
  double fixation_tol = 1e-2;
  long n = 10;
  long m = 0;
  double x = 0.5;
  double y = 0.5;
  std::vector<double> times{0.1, 0.5, 2.0};
  std::vector<long> n_list{100, 1000, 10000};
  double t_probe = 0.05;
  long exponent_max = 2;
  std::vector<double> x_values{0.2, 0.8};
  std::vector<double> y_values{0.2, 0.8};
  std::size_t rhs_reps = 100000;
  long record_every = 100;
  friend bool operator==(const NumericSettings&, const NumericSettings&) = default;
};

struct WFSettings {
  long N = 100;
  ExchangeMode exchange = ExchangeMode::fixed;
  long generations = 1000;
  friend bool operator==(const WFSettings&, const WFSettings&) = default;
};

struct ExperimentConfig {
  ModelParams model;
  std::string experiment;  // empty: chosen by the caller
  NumericSettings numeric;
  WFSettings wf;
  std::uint64_t seed = 1;
  std::string out = "out";
  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Every problem found in a config text, one "line N: ..." entry each.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> errors)
      : std::runtime_error(join(errors)), errors_(std::move(errors)) {}
  const std::vector<std::string>& errors() const noexcept { return errors_; }

 private:
  static std::string join(const std::vector<std::string>& e) {
    std::string s;
    for (const auto& line : e) s += (s.empty() ? "" : "\n") + line;
    return s;
  }
  std::vector<std::string> errors_;
};

/// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return false;
  if constexpr (std::is_floating_point_v<T>) return std::isfinite(out);
  return true;
}

template <class T>
bool parse_list(std::string_view s, std::vector<T>& out) {
  out.clear();
  while (true) {
    const auto comma = s.find(',');
    T v{};
    if (!parse_number(s.substr(0, comma), v)) return false;
    out.push_back(v);
    if (comma == std::string_view::npos) return true;
    s.remove_prefix(comma + 1);
  }
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const auto b = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > b) out.push_back(s.substr(b, i - b));
  }
  return out;
}

template <class T>
std::string join_list(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    if constexpr (std::is_floating_point_v<T>) s += format_double(v[i]);
    else s += std::to_string(v[i]);
  }
  return s;
}

}  // namespace detail

/// Parses the sectioned `key = value` format. Sections: [model], [lambda],
/// [lambda_bar], [experiment], [numeric], [wf], [run]. Measure sections hold
/// `atom z w` and `beta alpha beta mass` lines. '#' starts a comment.
inline ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  std::vector<std::string> errors;
  std::vector<Atom> atoms[2];
  std::vector<BetaComponent> comps[2];
  std::string section;
  std::set<std::string> seen_sections, seen_keys;
  long line_no = 0;

  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    auto fail = [&](const std::string& msg) { errors.push_back("line " + std::to_string(line_no) + ": " + msg); };

    if (line.front() == '[') {
      if (line.back() != ']') {
        fail("malformed section header");
        continue;
      }
      section = std::string(detail::trim(line.substr(1, line.size() - 2)));
      static const std::set<std::string> known{"model", "lambda", "lambda_bar", "experiment", "numeric", "wf", "run"};
      if (!known.count(section)) {
        fail("unknown section [" + section + "]");
        section = "?";
      } else if (!seen_sections.insert(section).second) {
        fail("duplicate section [" + section + "]");
      }
      continue;
    }
    if (section.empty()) {
      fail("entry outside any section");
      continue;
    }
    if (section == "?") continue;

    if (section == "lambda" || section == "lambda_bar") {
      const int which = section == "lambda" ? 0 : 1;
      const auto words = detail::split_ws(line);
      std::vector<double> v;
      for (std::size_t i = 1; i < words.size(); ++i) {
        double d = 0.0;
        if (!detail::parse_number(words[i], d)) {
          fail("'" + std::string(words[i]) + "' is not a number");
          v.clear();
          break;
        }
        v.push_back(d);
      }
      if (words.empty() || (words.size() > 1 && v.empty())) continue;
      try {
        if (words[0] == "atom" && v.size() == 2) {
          SwitchingMeasure::atom(v[0], v[1]);
          atoms[which].push_back({v[0], v[1]});
        } else if (words[0] == "beta" && v.size() == 3) {
          SwitchingMeasure::beta(v[0], v[1], v[2]);
          comps[which].push_back({v[0], v[1], v[2]});
        } else {
          fail("expected 'atom z w' or 'beta alpha beta mass' in [" + section + "]");
        }
      } catch (const std::domain_error& e) {
        fail(std::string("range error: ") + e.what());
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      fail("expected 'key = value'");
      continue;
    }
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string_view value = detail::trim(line.substr(eq + 1));
    if (!seen_keys.insert(section + "." + key).second) {
      fail("duplicate key '" + key + "'");
      continue;
    }

    auto real = [&](double& dst, auto ok, const char* range) {
      double v = 0.0;
      if (!detail::parse_number(value, v)) return fail("'" + key + "' needs a number, got '" + std::string(value) + "'");
      if (!ok(v)) return fail("range error: '" + key + "' must be " + range);
      dst = v;
    };
    auto integer = [&](long& dst, long lo, const char* range) {
      long v = 0;
      if (!detail::parse_number(value, v)) return fail("'" + key + "' needs an integer, got '" + std::string(value) + "'");
      if (v < lo) return fail("range error: '" + key + "' must be " + range);
      dst = v;
    };
    auto count = [&](std::size_t& dst) {
      long v = 0;
      integer(v, 1, ">= 1");
      if (v >= 1) dst = static_cast<std::size_t>(v);
    };
    const auto nonneg = [](double v) { return v >= 0.0; };
    const auto positive = [](double v) { return v > 0.0; };
    const auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    const auto tol = [](double v) { return v >= 0.0 && v < 0.5; };
    auto unknown = [&] { fail("unknown key '" + key + "' in [" + section + "]"); };

    if (section == "model") {
      auto& p = cfg.model;
      if (key == "c") real(p.c, nonneg, ">= 0");
      else if (key == "K") real(p.K, positive, "> 0");
      else if (key == "u1") real(p.u1, nonneg, ">= 0");
      else if (key == "u2") real(p.u2, nonneg, ">= 0");
      else if (key == "u1p") real(p.u1p, nonneg, ">= 0");
      else if (key == "u2p") real(p.u2p, nonneg, ">= 0");
      else if (key == "u_active") real(p.u_active, nonneg, ">= 0");
      else if (key == "u_dormant") real(p.u_dormant, nonneg, ">= 0");
      else unknown();
    } else if (section == "experiment") {
      if (key == "name") {
        if (std::find(kExperiments.begin(), kExperiments.end(), value) == kExperiments.end())
          fail("unknown experiment '" + std::string(value) + "'");
        else cfg.experiment = std::string(value);
      } else {
        unknown();
      }
    } else if (section == "numeric") {
      auto& s = cfg.numeric;
      if (key == "reps") count(s.reps);
      else if (key == "dt") real(s.dt, positive, "> 0");
      else if (key == "T") real(s.T, positive, "> 0");
      else if (key == "eps") real(s.eps, [](double v) { return v > 0.0 && v < 1.0; }, "in (0,1)");
      else if (key == "boundary_tol") real(s.boundary_tol, tol, "in [0, 0.5)");
      else if (key == "fixation_tol") real(s.fixation_tol, tol, "in [0, 0.5)");
      else if (key == "n") integer(s.n, 0, ">= 0");
      else if (key == "m") integer(s.m, 0, ">= 0");
      else if (key == "x") real(s.x, unit, "in [0,1]");
      else if (key == "y") real(s.y, unit, "in [0,1]");
      else if (key == "t_probe") real(s.t_probe, positive, "> 0");
      else if (key == "exponent_max") integer(s.exponent_max, 1, ">= 1");
      else if (key == "rhs_reps") count(s.rhs_reps);
      else if (key == "record_every") integer(s.record_every, 0, ">= 0");
      else if (key == "times" || key == "x_values" || key == "y_values") {
        std::vector<double> v;
        const bool times = key == "times";
        if (!detail::parse_list(value, v)) fail("'" + key + "' needs a comma-separated list of numbers");
        else if (!std::all_of(v.begin(), v.end(), [&](double t) { return times ? nonneg(t) : unit(t); }))
          fail(std::string("range error: '") + key + "' entries must be " + (times ? ">= 0" : "in [0,1]"));
        else (times ? s.times : key == "x_values" ? s.x_values : s.y_values) = v;
      } else if (key == "n_list") {
        std::vector<long> v;
        if (!detail::parse_list(value, v)) fail("'n_list' needs a comma-separated list of integers");
        else if (!std::all_of(v.begin(), v.end(), [](long k) { return k >= 1; })) fail("range error: 'n_list' entries must be >= 1");
        else s.n_list = v;
      } else {
        unknown();
      }
    } else if (section == "wf") {
      if (key == "N") integer(cfg.wf.N, 1, ">= 1");
      else if (key == "generations") integer(cfg.wf.generations, 0, ">= 0");
      else if (key == "exchange") {
        if (value == "fixed") cfg.wf.exchange = ExchangeMode::fixed;
        else if (value == "binomial") cfg.wf.exchange = ExchangeMode::binomial;
        else fail("'exchange' must be 'fixed' or 'binomial'");
      } else {
        unknown();
      }
    } else if (section == "run") {
      if (key == "seed") {
        std::uint64_t v = 0;
        if (!detail::parse_number(value, v)) fail("'seed' needs a 64-bit unsigned integer");
        else cfg.seed = v;
      } else if (key == "out") {
        if (value.empty()) fail("'out' must not be empty");
        else cfg.out = std::string(value);
      } else {
        unknown();
      }
    }
  }
  if (cfg.numeric.n + cfg.numeric.m < 1) errors.push_back("[numeric]: n + m must be at least 1");
  if (!std::is_sorted(cfg.numeric.times.begin(), cfg.numeric.times.end()))
    errors.push_back("[numeric]: 'times' must be sorted");
  if (!errors.empty()) throw ConfigError(std::move(errors));
  cfg.model.lambda_ad = SwitchingMeasure(std::move(atoms[0]), std::move(comps[0]));
  cfg.model.lambda_da = SwitchingMeasure(std::move(atoms[1]), std::move(comps[1]));
  return cfg;
}

/// Canonical text of a config, with every default written out.
inline std::string serialize(const ExperimentConfig& cfg) {
  std::ostringstream os;
  const auto& p = cfg.model;
  const auto& s = cfg.numeric;
  auto d = format_double;
  os << "[model]\n"
     << "c = " << d(p.c) << "\nK = " << d(p.K) << "\nu1 = " << d(p.u1) << "\nu2 = " << d(p.u2)
     << "\nu1p = " << d(p.u1p) << "\nu2p = " << d(p.u2p) << "\nu_active = " << d(p.u_active)
     << "\nu_dormant = " << d(p.u_dormant) << "\n";
  auto measure = [&](const char* name, const SwitchingMeasure& m) {
    os << "\n[" << name << "]\n";
    for (const auto& a : m.atoms()) os << "atom " << d(a.z) << " " << d(a.weight) << "\n";
    for (const auto& c : m.components()) os << "beta " << d(c.alpha) << " " << d(c.beta) << " " << d(c.mass) << "\n";
  };
  measure("lambda", p.lambda_ad);
  measure("lambda_bar", p.lambda_da);
  if (!cfg.experiment.empty()) os << "\n[experiment]\nname = " << cfg.experiment << "\n";
  os << "\n[numeric]\n"
     << "reps = " << s.reps << "\ndt = " << d(s.dt) << "\nT = " << d(s.T) << "\neps = " << d(s.eps)
     << "\nboundary_tol = " << d(s.boundary_tol) << "\nfixation_tol = " << d(s.fixation_tol) << "\nn = " << s.n
     << "\nm = " << s.m << "\nx = " << d(s.x) << "\ny = " << d(s.y) << "\ntimes = " << detail::join_list(s.times)
     << "\nn_list = " << detail::join_list(s.n_list) << "\nt_probe = " << d(s.t_probe)
     << "\nexponent_max = " << s.exponent_max << "\nx_values = " << detail::join_list(s.x_values)
     << "\ny_values = " << detail::join_list(s.y_values) << "\nrhs_reps = " << s.rhs_reps
     << "\nrecord_every = " << s.record_every << "\n";
  os << "\n[wf]\nN = " << cfg.wf.N << "\nexchange = " << (cfg.wf.exchange == ExchangeMode::fixed ? "fixed" : "binomial")
     << "\ngenerations = " << cfg.wf.generations << "\n";
  os << "\n[run]\nseed = " << cfg.seed << "\nout = " << cfg.out << "\n";
  return os.str();
}

}  // namespace seedbank
