#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "seedbank/acceptance.hpp"
#include "seedbank/config.hpp"
#include "seedbank/experiments.hpp"

namespace {

struct Flags {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  unsigned workers = 0;
};

void add_common(CLI::App* cmd, Flags& f, bool experiment) {
  if (experiment) {
    cmd->add_option("--config", f.config, "Config file")->check(CLI::ExistingFile);
    cmd->add_option("--out", f.out, "Output directory (overrides [run] out)");
  }
  cmd->add_option("--seed", f.seed, "Master seed (overrides [run] seed)");
  cmd->add_option("--workers", f.workers, "Worker threads (default: $SEEDBANK_WORKERS or 1)")->check(CLI::PositiveNumber);
}

seedbank::ExperimentConfig load(const Flags& f, const std::string& name, const CLI::App* cmd) {
  seedbank::ExperimentConfig cfg;
  if (!f.config.empty()) {
    std::ifstream in(f.config, std::ios::binary);
    std::stringstream text;
    text << in.rdbuf();
    cfg = seedbank::parse_config(text.str());
    if (!cfg.experiment.empty() && cfg.experiment != name)
      throw std::domain_error("config names experiment '" + cfg.experiment + "' but the subcommand is '" + name + "'");
  }
  cfg.experiment = name;
  if (cmd->count("--seed")) cfg.seed = f.seed;
  if (cmd->count("--out")) cfg.out = f.out;
  return cfg;
}

int acceptance(std::uint64_t seed, unsigned workers) {
  const auto results = seedbank::run_acceptance(seed, workers, workers == 1 ? 2 : 1, std::cout);
  std::size_t passed = 0;
  for (const auto& r : results) passed += r.pass;
  std::cout << passed << "/" << results.size() << " criteria passed" << std::endl;
  return passed == results.size() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Seed bank coalescent, Wright-Fisher and diffusion simulator"};
  app.set_version_flag("--version", seedbank::kVersion);
  app.require_subcommand(0, 1);
  bool run_acceptance_flag = false;
  app.add_flag("--acceptance", run_acceptance_flag, "Run the acceptance suite");

  Flags flags;
  std::vector<std::pair<std::string, CLI::App*>> commands;
  for (const auto name : seedbank::kExperiments) {
    auto* cmd = app.add_subcommand(std::string(name), "Run the " + std::string(name) + " experiment");
    add_common(cmd, flags, true);
    commands.emplace_back(std::string(name), cmd);
  }
  auto* acc = app.add_subcommand("acceptance", "Run all acceptance criteria and print PASS/FAIL lines");
  add_common(acc, flags, false);
  CLI11_PARSE(app, argc, argv);

  const unsigned workers = flags.workers ? flags.workers : seedbank::default_workers();
  try {
    if (run_acceptance_flag || acc->parsed()) return acceptance(acc->count("--seed") ? flags.seed : 1, workers);
    for (const auto& [name, cmd] : commands) {
      if (!cmd->parsed()) continue;
      const auto cfg = load(flags, name, cmd);
      const auto report = seedbank::run_experiment(cfg, workers);
      std::cout << name << ": " << report.summary << "\n";
      for (const auto& file : report.files) std::cout << "  wrote " << file.string() << "\n";
      return 0;
    }
    std::cout << app.help();
    return 1;
  } catch (const seedbank::ConfigError& e) {
    std::cerr << "config error:\n" << e.what() << "\n";
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << "\n";
  }
  return 2;
}
