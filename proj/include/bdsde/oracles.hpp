#pragma once

#include "bdsde/coefficients.hpp"
#include "bdsde/problem.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace bdsde {

/// Uniform spatial grid: count (odd) nodes centred on `center`.
struct SpaceGrid {
  double center = 0.0;
  double half_width = 6.0;
  int count = 1025;

  double spacing() const { return 2.0 * half_width / (count - 1); }
  double x(int i) const { return center - half_width + i * spacing(); }
};

/// Far-field half width covering `sigmas` standard deviations of the diffusion over the horizon.
SpaceGrid space_grid_around(double center, double sigma_max, double horizon, double spacing, double sigmas = 6.0);

struct GridFunction {
  SpaceGrid grid;
  double time = 0.0;
  std::vector<double> values;

  /// Four-point Lagrange interpolation (linear near the boundary).
  double operator()(double x) const;
};

/// Two-column text dump with a header line naming the time.
void write_grid_function(std::ostream& os, const GridFunction& f, const std::string& params = "");

struct PdeOptions {
  SpaceGrid space;
  int n_time_steps = 100;
  int corrector_sweeps = 2;
  /// Paper-clock times to report; empty means the horizon only. Each must be a time node.
  std::vector<double> output_times;
  /// delta / h^2 above this sets accuracy_warning.
  double accuracy_ratio_limit = 1e4;
};

struct PdeResult {
  std::vector<GridFunction> outputs;
  bool accuracy_warning = false;
};

/// Crank-Nicolson solution of u_s = sigma^2/2 u_xx + b u_x + f(s, x, u, u_x sigma), u(0) = l, for d = 1 and g = 0.
PdeResult pde_solve(const CoefficientSet& coeffs, double horizon, const PdeOptions& options);

/// Lie splitting: per B increment, Crank-Nicolson sub-steps followed by u += g(s, x, u) dB at every node.
/// b_increments are on the reversed clock (as produced by sample_b_increments); n_time_steps must be a
/// multiple of their count.
PdeResult spde_solve_pathwise(const CoefficientSet& coeffs, double horizon, const PdeOptions& options,
                              const std::vector<Vec>& b_increments);

/// Central difference per component.
Vec fd_gradient(const std::function<double(const Vec&)>& field, const Vec& x, double h);
double fd_gradient(const GridFunction& field, double x, double h);

/// Exact enumeration of the Rademacher scheme. Level k holds 2^(k d) prefixes;
/// bit (j d + c) of a prefix is the sign of W-component c at step j (1 = +sqrt(delta)).
struct TreeResult {
  double u = 0.0;
  std::vector<std::vector<double>> y;       // y[k][prefix]
  std::vector<std::vector<RowVec>> z;       // z[k][prefix]
  Vec grad_u;                               // bump-and-revalue in x
  std::vector<RowVec> delta_z;              // mean jump per interior partition node
  std::vector<std::vector<RowVec>> delta_z_prefix;  // per prefix at the node
};

struct TreeOptions {
  double bump = 1e-4;
  bool gradient = true;
  bool jumps = true;
};

inline constexpr int kTreeMaxSteps = 8;

TreeResult tree_enumerate(const ProblemSpec& spec, int outer_id, const TreeOptions& options = {});

}  // namespace bdsde
