#pragma once

#include "bdsde/forward.hpp"
#include "bdsde/problem.hpp"
#include "bdsde/regression.hpp"

#include <vector>

namespace bdsde {

/// Discrete (Y, Z) on the reversed clock for one frozen B-path.
/// Node 0 is the start (t, x); node n_steps carries the terminal data.
struct BackwardSolution {
  int n_paths = 0;
  int n_steps = 0;
  int dim = 1;
  std::vector<double> y;  // (n_steps + 1) x n_paths
  std::vector<double> z;  // (n_steps + 1) x n_paths x dim
  double u_value = 0.0;
  /// Standard error of the per-path functional l + sum f delta + sum g dB.
  double std_error = 0.0;
  std::vector<StepDiagnostics> diagnostics;  // steps 0 .. n_steps - 1
  /// Standard error of the ensemble mean of Z at node k (n_steps x dim), from the
  /// unprojected targets; the projection keeps that mean because the basis holds constants.
  std::vector<double> z_mean_se;

  double y_at(int k, int p) const { return y[idx(k, p)]; }
  RowVec z_at(int k, int p) const { return Eigen::Map<const RowVec>(&z[idx(k, p) * dim], dim); }
  std::vector<double> y_path(int p) const;
  std::vector<RowVec> z_path(int p) const;

  std::size_t idx(int k, int p) const { return static_cast<std::size_t>(k) * n_paths + p; }
};

BackwardSolution solve_bdsde(const ProblemSpec& spec, const CoefficientSet& coeffs, const PathEnsemble& ens);

struct UEstimate {
  double value = 0.0;
  double std_error = 0.0;
  int n_samples = 0;
};

/// u(t, x) for the frozen B-path outer_id.
UEstimate evaluate_u(const ProblemSpec& spec, int outer_id);

/// (grad Y, grad Z) of the variational equation, coefficients frozen along a base solution.
struct VariationalSolution {
  int n_paths = 0;
  int n_steps = 0;
  int dim = 1;
  std::vector<double> grad_y;  // (n_steps + 1) x n_paths x dim
  std::vector<double> grad_z;  // (n_steps + 1) x n_paths x dim x dim, entry (c, m) = d Z_c / d x_m
  Vec grad_u_value;
  Vec std_error;

  RowVec grad_y_at(int k, int p) const;
  Mat grad_z_at(int k, int p) const;
};

/// Needs f, g and l partials (analytic, or supplied by mollify mode).
VariationalSolution solve_variational(const ProblemSpec& spec, const CoefficientSet& coeffs, const PathEnsemble& ens,
                                      const BackwardSolution& base);

struct JumpComponent {
  int partition_index = 0;  // i in 1..n-1
  double time = 0.0;        // t_i on the paper clock
  int sim_node = 0;         // reversed-clock node of t_i
  /// alpha and beta on nodes sim_node..n_steps: (n_steps - sim_node + 1) x n_paths x dim (x dim).
  std::vector<double> alpha;
  std::vector<double> beta;
  /// Per path Z(t_i+) - Z(t_i-), n_paths x dim.
  std::vector<double> delta_z;
  RowVec delta_z_mean;
  RowVec delta_z_se;
};

struct JumpSolution {
  std::vector<JumpComponent> jumps;
};

/// Jump sizes of Z at the interior partition nodes of a multi-point terminal.
JumpSolution solve_jump_system(const ProblemSpec& spec, const CoefficientSet& coeffs, const PathEnsemble& ens,
                               const BackwardSolution& base);

/// Terminal points of path p in partition order.
std::vector<Vec> terminal_points(const PathEnsemble& ens, const std::vector<int>& nodes, int p);

/// Mean and standard error of n samples with m components (row-major).
void sample_moments(const std::vector<double>& samples, int n, int m, Eigen::VectorXd& mean, Eigen::VectorXd& se,
                    int threads = 1);

}  // namespace bdsde
