// Command-line front end: simulate, sweep, histogram, verify.
//
// Exit status: 0 on success, 1 when a verification battery fails, 2 on bad
// input or I/O errors.

#include <netsel/config.hpp>
#include <netsel/experiments.hpp>
#include <netsel/verification.hpp>

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace netsel;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::optional<int> replicates;
  int threads = 0;
  bool no_gnuplot = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "scenario JSON file");
  app->add_option("--seed", c.seed, "master seed (overrides the config)");
  app->add_option("--out", c.out, "output directory")->capture_default_str();
  app->add_option("--replicates", c.replicates, "replicate count (overrides the config)")
      ->check(CLI::PositiveNumber);
  app->add_option("--threads", c.threads, "worker threads, 0 for all cores")->capture_default_str();
  app->add_flag("--no-gnuplot", c.no_gnuplot, "skip the gnuplot scripts");
}

ScenarioConfig resolve(const Common& c) {
  ScenarioConfig cfg = c.config.empty() ? ScenarioConfig{} : load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.replicates) cfg.replicates = *c.replicates;
  cfg.validate();
  return cfg;
}

fs::path base_dir(const Common& c) { return c.config.empty() ? fs::path{} : fs::path(c.config).parent_path(); }

ExperimentOptions options(const Common& c, const ScenarioConfig& cfg) {
  ExperimentOptions o;
  o.replicates = cfg.replicates;
  o.threads = c.threads;
  o.gnuplot = !c.no_gnuplot;
  return o;
}

void print_files(const RunArtifacts& a) {
  for (const auto& f : a.files) std::cout << "wrote " << f.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Networked feature selection experiments"};
  app.require_subcommand(1);

  Common sim_c, sweep_c, hist_c, ver_c;
  std::vector<std::string> strategies;
  std::vector<double> sweep_betas{0.0, 1.0, 2.0, 5.0}, hist_betas{0.0, 5.0};
  bool corrupt_pmf = false;

  auto* sim = app.add_subcommand("simulate", "compare selection strategies over a full run");
  add_common(sim, sim_c);
  sim->add_option("--strategy", strategies, "randomized, uniform, greedy or all (repeatable)");

  auto* sweep = app.add_subcommand("sweep", "time-averaged covariance ratio against beta");
  add_common(sweep, sweep_c);
  sweep->add_option("--betas", sweep_betas, "beta values")->delimiter(',')->capture_default_str();

  auto* hist = app.add_subcommand("histogram", "leverage-score histograms at t = 0 for several beta");
  add_common(hist, hist_c);
  hist->add_option("--betas", hist_betas, "beta values")->delimiter(',')->capture_default_str();

  auto* ver = app.add_subcommand("verify", "run the property batteries and write a report");
  add_common(ver, ver_c);
  ver->add_flag("--corrupt-pmf", corrupt_pmf, "fault injection: break the PMF normalization");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      const auto cfg = resolve(sim_c);
      std::vector<Strategy> list;
      if (strategies.empty()) strategies = {"all"};
      for (const auto& s : strategies) {
        if (s == "all")
          list.insert(list.end(), {Strategy::Randomized, Strategy::Uniform, Strategy::Greedy});
        else
          list.push_back(parse_strategy(s));
      }
      const auto sc = make_scenario(cfg, base_dir(sim_c));
      const auto res = run_comparison(sc, cfg.seed, list, options(sim_c, cfg), sim_c.out);
      for (const auto& s : res.strategies)
        std::cout << to_string(s.strategy) << ": mean theta " << fmt(s.mean_theta) << ", mean psi "
                  << fmt(s.mean_psi) << ", features per cycle " << fmt(s.mean_selected) << " of "
                  << fmt(s.mean_candidates) << "\n";
      print_files(res.artifacts);
    } else if (sweep->parsed()) {
      const auto cfg = resolve(sweep_c);
      const auto sc = make_scenario(cfg, base_dir(sweep_c));
      const auto res = run_connectivity_sweep(sc, cfg.seed, sweep_betas, options(sweep_c, cfg), sweep_c.out);
      for (const auto& p : res.points)
        std::cout << "beta " << fmt(p.beta) << ": mean psi " << fmt(p.mean_psi) << "\n";
      print_files(res.artifacts);
    } else if (hist->parsed()) {
      const auto cfg = resolve(hist_c);
      const auto sc = make_scenario(cfg, base_dir(hist_c));
      const auto res = run_leverage_histogram(sc, hist_betas, options(hist_c, cfg), hist_c.out);
      for (const auto& h : res.histograms)
        std::cout << "beta " << fmt(h.beta) << ": " << h.scores.size() << " candidates, score stddev "
                  << fmt(h.stddev) << "\n";
      print_files(res.artifacts);
    } else if (ver->parsed()) {
      const auto cfg = resolve(ver_c);
      VerificationOptions o;
      o.seed = cfg.seed;
      o.eps = cfg.eps;
      o.delta = cfg.delta;
      o.chi_replicates = cfg.chi_replicates;
      o.corrupt_pmf = corrupt_pmf;
      o.threads = ver_c.threads;
      const auto rep = run_verification(o);
      ensure_dir(ver_c.out);
      const fs::path txt = fs::path(ver_c.out) / "verification.txt";
      std::ofstream out(txt, std::ios::binary | std::ios::trunc);
      if (!(out << rep.text())) throw Error("cannot write " + txt.string());
      out.close();
      rep.write_csv(fs::path(ver_c.out) / "verification.csv");
      std::cout << rep.text();
      return rep.all_passed() ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
