#include "bdsde/bdsde_solver.hpp"
#include "bdsde/forward.hpp"
#include "bdsde/harness.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out;
  std::string dump_paths;
  int dump_count = 8;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config) {
  auto* opt = cmd->add_option("--config", c.config, "experiment file (key = value lines)");
  if (needs_config) opt->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "override the config seed");
  cmd->add_option("--threads", c.threads, "worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
  cmd->add_option("--out", c.out, "CSV output path (default stdout)");
}

bdsde::ExperimentConfig load(const Common& c) {
  bdsde::ExperimentConfig cfg = bdsde::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.threads) cfg.threads = *c.threads;
  if (!c.out.empty()) cfg.output = c.out;
  return cfg;
}

void emit(const bdsde::ExperimentConfig& cfg, const std::vector<bdsde::ResultRecord>& records) {
  if (cfg.output.empty()) {
    bdsde::write_records(std::cout, records);
    return;
  }
  std::ofstream os(cfg.output);
  if (!os) throw std::runtime_error("cannot open " + cfg.output);
  bdsde::write_records(os, records);
}

void dump_paths(const Common& c, const bdsde::ProblemSpec& spec) {
  if (c.dump_paths.empty()) return;
  std::filesystem::create_directories(c.dump_paths);
  const bdsde::CoefficientSet coeffs = bdsde::effective_coefficients(spec);
  const int n = std::min(c.dump_count, spec.n_inner_paths);
  for (int p = 0; p < n; ++p) {
    const auto fb = bdsde::simulate_forward(spec, coeffs, bdsde::sample_noise(spec, 0, p));
    std::ofstream os(std::filesystem::path(c.dump_paths) / ("path_" + std::to_string(p) + ".csv"));
    bdsde::write_path_dump(os, spec, fb);
  }
}

std::vector<bdsde::ResultRecord> simulate(const bdsde::ExperimentConfig& cfg) {
  const bdsde::ProblemSpec spec = bdsde::to_problem(cfg);
  const bdsde::CoefficientSet coeffs = bdsde::effective_coefficients(spec);
  const auto t0 = std::chrono::steady_clock::now();
  const bdsde::PathEnsemble ens = bdsde::simulate_ensemble(spec, coeffs, cfg.outer_id, false);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const int d = spec.dim();
  const int np = ens.n_paths();
  std::vector<bdsde::ResultRecord> out;
  for (int k = 0; k <= spec.n_steps(); ++k) {
    std::vector<double> xs(static_cast<std::size_t>(np) * d);
    for (int p = 0; p < np; ++p)
      for (int c = 0; c < d; ++c) xs[static_cast<std::size_t>(p) * d + c] = ens.x(k, p)[c];
    Eigen::VectorXd mean, se;
    bdsde::sample_moments(xs, np, d, mean, se, spec.threads);
    for (int c = 0; c < d; ++c) {
      bdsde::ResultRecord r;
      r.experiment_id = cfg.id;
      r.kind = "simulate";
      r.params_hash = bdsde::params_hash(cfg);
      r.label = "x" + std::to_string(c + 1) + "_mean";
      r.time = spec.grid.paper_time(k);
      r.value = mean(c);
      r.std_error = se(c);
      r.n_samples = np;
      r.wall_clock_s = wall;
      out.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo lab for backward doubly stochastic differential equations"};
  app.require_subcommand(1);

  Common sim, est, cmp, jmp, conv;
  auto* c_sim = app.add_subcommand("simulate", "forward paths: node means of X");
  add_common(c_sim, sim, true);
  c_sim->add_option("--dump-paths", sim.dump_paths, "directory for per-path CSV dumps");
  c_sim->add_option("--dump-count", sim.dump_count, "number of inner paths to dump");

  auto* c_est = app.add_subcommand("estimate", "run the experiment kind named in the config");
  add_common(c_est, est, true);
  c_est->add_option("--dump-paths", est.dump_paths, "directory for per-path CSV dumps");

  auto* c_cmp = app.add_subcommand("compare", "u estimate against the PDE/SPDE or tree oracle");
  add_common(c_cmp, cmp, true);
  auto* c_jmp = app.add_subcommand("jumps", "Z jumps at the partition nodes");
  add_common(c_jmp, jmp, true);
  auto* c_conv = app.add_subcommand("convergence", "u along the refinement ladder");
  add_common(c_conv, conv, true);

  auto* c_acc = app.add_subcommand("accept", "run the acceptance criteria");
  bdsde::AcceptanceOptions acc;
  std::string acc_out;
  c_acc->add_option("--seed", acc.seed, "base seed");
  c_acc->add_option("--threads", acc.threads, "worker threads")->check(CLI::PositiveNumber);
  c_acc->add_option("--out", acc_out, "CSV of criterion records");
  c_acc->add_option("--path-scale", acc.path_scale, "multiplier on every path count")->check(CLI::PositiveNumber);
  c_acc->add_option("--only", acc.only, "criteria to run (1-9)")->check(CLI::Range(1, 9));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c_acc) {
      const bdsde::AcceptanceReport rep = bdsde::run_acceptance(acc, &std::cout);
      if (!acc_out.empty()) {
        std::ofstream os(acc_out);
        os << "criterion,name,status,statistic,target,seconds\n";
        for (const auto& r : rep.results) {
          os << r.id << ',' << r.name << ',' << bdsde::to_string(r.status) << ',' << r.statistic << ',' << r.target
             << ',' << r.seconds << '\n';
        }
      }
      return rep.exit_code();
    }
    if (*c_sim) {
      const auto cfg = load(sim);
      dump_paths(sim, bdsde::to_problem(cfg));
      emit(cfg, simulate(cfg));
      return 0;
    }
    Common* common = *c_est ? &est : *c_cmp ? &cmp : *c_jmp ? &jmp : &conv;
    auto cfg = load(*common);
    if (*c_cmp && cfg.kind == "u-estimate") cfg.kind = "oracle-compare";
    if (*c_jmp) cfg.kind = "jumps";
    if (*c_conv) cfg.kind = "convergence";
    if (*c_est && !est.dump_paths.empty()) dump_paths(est, bdsde::to_problem(cfg));
    emit(cfg, bdsde::run_experiment(cfg));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
