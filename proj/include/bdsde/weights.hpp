#pragma once

#include "bdsde/bdsde_solver.hpp"
#include "bdsde/forward.hpp"
#include "bdsde/problem.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace bdsde {

/// M and N weights of one path for a list of (r, s) pairs given as
/// paper-clock node indices with r < s.
struct WeightProcess {
  std::vector<std::pair<int, int>> pairs;
  std::vector<Vec> m_values;
  std::vector<RowVec> n_values;
};

/// M^s_r = sum over the steps between r and s of (sigma^-1 grad X)^T dW;
/// N^s_r = (M^s_r)^T (grad X at s)^-1 / (s - r).
WeightProcess compute_weights(const ProblemSpec& spec, const ForwardBundle& bundle, const NoisePath& noise,
                              const std::vector<std::pair<int, int>>& pairs);

struct WeightEstimate {
  Vec value;
  Vec std_error;
  int n_samples = 0;
  /// Paper-clock anchor time and a short description of the anchor.
  double anchor_time = 0.0;
  std::string anchor;
  /// Per-path values (n_samples x dim) for Z estimates; empty for gradients.
  std::vector<double> per_path;
};

/// Derivative-free gradient of u(t, .) at x: l N^t_0 + sum (f delta + g dB) N^t_r.
WeightEstimate estimate_grad_u_weights(const ProblemSpec& spec, const CoefficientSet& coeffs, const PathEnsemble& ens,
                                       const BackwardSolution& base);
WeightEstimate estimate_grad_u_weights(const ProblemSpec& spec, int outer_id);

/// Z at paper-clock node s_index (0 < s_index <= n_steps), regressed on the state at s and multiplied by sigma.
WeightEstimate estimate_z_weights(const ProblemSpec& spec, const CoefficientSet& coeffs, const PathEnsemble& ens,
                                  const BackwardSolution& base, int s_index);
WeightEstimate estimate_z_weights(const ProblemSpec& spec, int outer_id, int s_index);

/// As estimate_z_weights with every anchor clamped to the left end of the partition interval holding s_index.
WeightEstimate estimate_z_discrete(const ProblemSpec& spec, const CoefficientSet& coeffs, const PathEnsemble& ens,
                                   const BackwardSolution& base, int s_index);
WeightEstimate estimate_z_discrete(const ProblemSpec& spec, int outer_id, int s_index);

/// Gradient-path slices of one inner path, used for the Y and Z parts of the Malliavin derivative.
struct VariationalPath {
  std::vector<RowVec> grad_y;
  std::vector<Mat> grad_z;
};
VariationalPath variational_path(const VariationalSolution& v, int p);

struct MalliavinDerivative {
  Mat dx;                    // D_s X_r
  std::optional<RowVec> dy;  // D_s Y_r
  std::optional<Mat> dz;     // D_s Z_r, row c is D_s Z_c
};

/// Indices are simulation-clock nodes; the shock at node s only reaches nodes r >= s,
/// so the result is zero for s > r.
MalliavinDerivative malliavin_derivative(const ForwardBundle& bundle, int s_index, int r_index,
                                         const VariationalPath* variational = nullptr);

}  // namespace bdsde
