#include "bdsde/bdsde_solver.hpp"
#include "bdsde/harness.hpp"
#include "bdsde/oracles.hpp"
#include "bdsde/weights.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace bdsde {

bool record_tolerance_pass(double value, double se, double oracle) {
  return std::abs(value - oracle) <= 3.0 * se + 0.02 * std::max(1.0, std::abs(oracle));
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Run {
  const ExperimentConfig& cfg;
  ProblemSpec spec;
  CoefficientSet coeffs;
  std::uint64_t hash;
  std::vector<ResultRecord> out;

  void emit(const std::string& label, double time, double value, double se, int n, std::optional<double> oracle,
            double wall) {
    ResultRecord r;
    r.experiment_id = cfg.id;
    r.kind = cfg.kind;
    r.params_hash = hash;
    r.label = label;
    r.time = time;
    r.value = value;
    r.std_error = se;
    r.n_samples = n;
    r.oracle = oracle;
    if (oracle) {
      r.abs_error = std::abs(value - *oracle);
      r.pass = record_tolerance_pass(value, se, *oracle);
    }
    r.wall_clock_s = wall;
    out.push_back(std::move(r));
  }
};

bool pde_available(const ProblemSpec& s) { return s.dim() == 1 && !s.coefficients.discrete_terminal(); }

bool tree_available(const ProblemSpec& s) {
  return s.noise_mode != NoiseMode::kGaussian && s.n_steps() <= kTreeMaxSteps && s.noise_master_steps == 0;
}

/// u(s, .) on a spatial grid at the requested paper times, for the frozen B-path of `outer`.
std::vector<GridFunction> field_oracle(const ExperimentConfig& cfg, const ProblemSpec& spec, const CoefficientSet& c,
                                       int outer, std::vector<double> times) {
  double sig = 0.0;
  Vec probe(1);
  for (int i = -40; i <= 40; ++i) {
    probe(0) = spec.x(0) + 0.2 * i;
    sig = std::max(sig, std::abs(c.diffusion(spec.t, probe)(0, 0)));
  }
  PdeOptions o;
  o.space = space_grid_around(spec.x(0), std::max(sig, 1e-3), spec.t, cfg.pde_spacing, 8.0);
  int nt = cfg.pde_time_steps > 0 ? cfg.pde_time_steps : std::max(4 * spec.n_steps(), 200);
  nt = (nt + spec.n_steps() - 1) / spec.n_steps() * spec.n_steps();
  o.n_time_steps = nt;
  o.output_times = std::move(times);
  if (c.noise_is_zero) return pde_solve(c, spec.t, o).outputs;
  return spde_solve_pathwise(c, spec.t, o, sample_b_increments(spec, outer)).outputs;
}

void run_u(Run& r, bool require_oracle) {
  const auto& s = r.spec;
  for (int outer = r.cfg.outer_id; outer < r.cfg.outer_id + r.cfg.n_outer_paths; ++outer) {
    const auto t0 = Clock::now();
    const PathEnsemble ens = simulate_ensemble(s, r.coeffs, outer, false);
    const BackwardSolution sol = solve_bdsde(s, r.coeffs, ens);
    std::optional<double> oracle;
    if (pde_available(s)) oracle = field_oracle(r.cfg, s, r.coeffs, outer, {s.t}).front()(s.x(0));
    if (!oracle && tree_available(s)) oracle = tree_enumerate(s, outer, {.gradient = false, .jumps = false}).u;
    if (require_oracle && !oracle) throw ConfigurationError("no oracle available for this problem (d = 1 or a small Rademacher tree)");
    r.emit("u outer=" + std::to_string(outer), s.t, sol.u_value, sol.std_error, sol.n_paths, oracle, seconds_since(t0));
    if (require_oracle && tree_available(s) && pde_available(s)) {
      const double tu = tree_enumerate(s, outer, {.gradient = false, .jumps = false}).u;
      r.emit("u_tree outer=" + std::to_string(outer), s.t, sol.u_value, sol.std_error, sol.n_paths, tu, 0.0);
    }
  }
}

void run_grad(Run& r, bool weights) {
  const auto& s = r.spec;
  const int d = s.dim();
  for (int outer = r.cfg.outer_id; outer < r.cfg.outer_id + r.cfg.n_outer_paths; ++outer) {
    const auto t0 = Clock::now();
    const PathEnsemble ens = simulate_ensemble(s, r.coeffs, outer, true);
    const BackwardSolution sol = solve_bdsde(s, r.coeffs, ens);
    Vec value, se;
    if (weights) {
      const WeightEstimate w = estimate_grad_u_weights(s, r.coeffs, ens, sol);
      value = w.value;
      se = w.std_error;
    } else {
      const VariationalSolution v = solve_variational(s, r.coeffs, ens, sol);
      value = v.grad_u_value;
      se = v.std_error;
    }
    std::optional<Vec> oracle;
    if (pde_available(s)) {
      const auto f = field_oracle(r.cfg, s, r.coeffs, outer, {s.t}).front();
      oracle = Vec::Constant(1, fd_gradient(f, s.x(0), f.grid.spacing()));
    } else if (tree_available(s)) {
      oracle = tree_enumerate(s, outer, {.gradient = true, .jumps = false}).grad_u;
    }
    const double wall = seconds_since(t0);
    for (int c = 0; c < d; ++c) {
      std::string label = weights ? "grad_weights" : "grad_variational";
      if (d > 1) label += "_" + std::to_string(c + 1);
      label += " outer=" + std::to_string(outer);
      r.emit(label, s.t, value(c), se(c), ens.n_paths(),
             oracle ? std::optional<double>((*oracle)(c)) : std::nullopt, wall);
    }
  }
}

int node_for_time(const ProblemSpec& s, double time) {
  const int j = s.grid.index_of(time);
  if (j < 0) throw ConfigurationError("time " + std::to_string(time) + " is not a grid node");
  return j;
}

void run_z(Run& r, bool discrete) {
  const auto& s = r.spec;
  const int n = s.n_steps();
  const int d = s.dim();
  for (int outer = r.cfg.outer_id; outer < r.cfg.outer_id + r.cfg.n_outer_paths; ++outer) {
    const PathEnsemble ens = simulate_ensemble(s, r.coeffs, outer, true);
    const BackwardSolution sol = solve_bdsde(s, r.coeffs, ens);
    std::vector<GridFunction> fields;
    if (!discrete && pde_available(s)) fields = field_oracle(r.cfg, s, r.coeffs, outer, r.cfg.z_times);
    std::optional<TreeResult> tree;
    if (tree_available(s)) tree = tree_enumerate(s, outer, {.gradient = false, .jumps = false});
    for (std::size_t q = 0; q < r.cfg.z_times.size(); ++q) {
      const auto t0 = Clock::now();
      const double time = r.cfg.z_times[q];
      const int j = node_for_time(s, time);
      const int a = n - j;
      const WeightEstimate w = discrete ? estimate_z_discrete(s, r.coeffs, ens, sol, j)
                                        : estimate_z_weights(s, r.coeffs, ens, sol, j);
      // Oracle: mean over paths of grad u(s, X_s) sigma(s, X_s), or the tree mean.
      std::optional<Vec> oracle;
      if (!fields.empty()) {
        const GridFunction& f = fields[q];
        double acc = 0.0;
        for (int p = 0; p < ens.n_paths(); ++p) {
          const Vec x = ens.x_vec(a, p);
          acc += fd_gradient(f, x(0), f.grid.spacing()) * r.coeffs.diffusion(time, x)(0, 0);
        }
        oracle = Vec::Constant(1, acc / ens.n_paths());
      } else if (tree) {
        Vec m = Vec::Zero(d);
        for (const auto& z : tree->z[a]) m += z.transpose();
        oracle = m / static_cast<double>(tree->z[a].size());
      }
      const double wall = seconds_since(t0);
      for (int c = 0; c < d; ++c) {
        const std::string suffix = (d > 1 ? "_" + std::to_string(c + 1) : std::string()) + " outer=" + std::to_string(outer);
        const auto orc = oracle ? std::optional<double>((*oracle)(c)) : std::nullopt;
        r.emit(std::string(discrete ? "z_discrete" : "z_weights") + suffix, time, w.value(c), w.std_error(c),
               w.n_samples, orc, wall);
        if (!discrete && a < n) {
          double zr = 0.0;
          for (int p = 0; p < ens.n_paths(); ++p) zr += sol.z_at(a, p)(c);
          r.emit("z_regression" + suffix, time, zr / ens.n_paths(), sol.z_mean_se[static_cast<std::size_t>(a) * d + c],
                 ens.n_paths(), orc, wall);
        }
      }
    }
  }
}

void run_jumps(Run& r) {
  const auto& s = r.spec;
  const int d = s.dim();
  for (int outer = r.cfg.outer_id; outer < r.cfg.outer_id + r.cfg.n_outer_paths; ++outer) {
    const auto t0 = Clock::now();
    const PathEnsemble ens = simulate_ensemble(s, r.coeffs, outer, true);
    const BackwardSolution sol = solve_bdsde(s, r.coeffs, ens);
    const JumpSolution js = solve_jump_system(s, r.coeffs, ens, sol);
    std::optional<TreeResult> tree;
    if (tree_available(s)) tree = tree_enumerate(s, outer, {.gradient = false, .jumps = true});
    for (std::size_t q = 0; q < js.jumps.size(); ++q) {
      const JumpComponent& jc = js.jumps[q];
      const int j = s.partition->indices()[static_cast<std::size_t>(jc.partition_index)];
      const WeightEstimate left = estimate_z_discrete(s, r.coeffs, ens, sol, j - 1);
      const WeightEstimate right = estimate_z_discrete(s, r.coeffs, ens, sol, j + 1);
      const double wall = seconds_since(t0);
      for (int c = 0; c < d; ++c) {
        const std::string suffix = (d > 1 ? "_" + std::to_string(c + 1) : std::string()) + " outer=" + std::to_string(outer);
        const auto tree_val = tree ? std::optional<double>(tree->delta_z[q](c)) : std::nullopt;
        r.emit("delta_z" + suffix, jc.time, jc.delta_z_mean(c), jc.delta_z_se(c), ens.n_paths(), tree_val, wall);
        r.emit("z_left" + suffix, jc.time - s.delta(), left.value(c), left.std_error(c), left.n_samples, std::nullopt, wall);
        r.emit("z_right" + suffix, jc.time + s.delta(), right.value(c), right.std_error(c), right.n_samples, std::nullopt,
               wall);
        const double jump = right.value(c) - left.value(c);
        const double se = std::hypot(right.std_error(c), left.std_error(c));
        r.emit("z_jump_weights" + suffix, jc.time, jump, se, ens.n_paths(), jc.delta_z_mean(c), wall);
      }
    }
  }
}

void run_convergence(Run& r) {
  for (const LadderRung& rung : r.cfg.ladder) {
    ExperimentConfig c = r.cfg;
    c.n_steps = rung.n_steps;
    c.n_inner_paths = rung.n_inner_paths;
    c.kind = "u-estimate";
    const ProblemSpec s = to_problem(c);
    const CoefficientSet coeffs = effective_coefficients(s);
    const auto t0 = Clock::now();
    const PathEnsemble ens = simulate_ensemble(s, coeffs, c.outer_id, false);
    const BackwardSolution sol = solve_bdsde(s, coeffs, ens);
    std::optional<double> oracle;
    if (pde_available(s)) oracle = field_oracle(c, s, coeffs, c.outer_id, {s.t}).front()(s.x(0));
    r.emit("u n_steps=" + std::to_string(rung.n_steps) + " paths=" + std::to_string(rung.n_inner_paths), s.t,
           sol.u_value, sol.std_error, sol.n_paths, oracle, seconds_since(t0));
  }
}

void run_acceptance_kind(Run& r) {
  AcceptanceOptions o;
  o.seed = r.cfg.seed;
  o.threads = r.cfg.threads;
  const AcceptanceReport rep = run_acceptance(o);
  for (const auto& c : rep.results) {
    ResultRecord rec;
    rec.experiment_id = r.cfg.id;
    rec.kind = r.cfg.kind;
    rec.params_hash = r.hash;
    rec.label = "criterion " + std::to_string(c.id) + " " + to_string(c.status);
    rec.value = c.statistic;
    rec.oracle = c.target;
    rec.abs_error = std::abs(c.statistic - c.target);
    rec.pass = c.status == CriterionStatus::kPass;
    rec.wall_clock_s = c.seconds;
    r.out.push_back(std::move(rec));
  }
}

}  // namespace

std::vector<ResultRecord> run_experiment(const ExperimentConfig& config) {
  const auto& kinds = experiment_kinds();
  if (std::find(kinds.begin(), kinds.end(), config.kind) == kinds.end()) {
    throw ConfigurationError("unknown experiment kind '" + config.kind + "'");
  }
  Run r{config, {}, {}, params_hash(config), {}};
  if (config.kind == "acceptance") {
    run_acceptance_kind(r);
    return r.out;
  }
  try {
    r.spec = to_problem(config);
    r.coeffs = effective_coefficients(r.spec);
    if (config.kind == "u-estimate") run_u(r, false);
    else if (config.kind == "oracle-compare") run_u(r, true);
    else if (config.kind == "grad-weights") run_grad(r, true);
    else if (config.kind == "grad-variational") run_grad(r, false);
    else if (config.kind == "z-profile") run_z(r, false);
    else if (config.kind == "z-discrete") run_z(r, true);
    else if (config.kind == "jumps") run_jumps(r);
    else if (config.kind == "convergence") run_convergence(r);
  } catch (const Error& e) {
    throw std::runtime_error("experiment '" + config.id + "' (" + config.kind + "): " + e.what());
  }
  return r.out;
}

}  // namespace bdsde
