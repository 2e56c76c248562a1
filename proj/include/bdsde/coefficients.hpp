#pragma once

#include "bdsde/expression.hpp"
#include "bdsde/types.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bdsde {

struct DriverPartials {
  RowVec fx;
  double fy = 0.0;
  RowVec fz;
};

/// gx(m, j) = d g_m / d x_j, gy(m) = d g_m / d y.
struct NoisePartials {
  Mat gx;
  Vec gy;
};

using DriftFn = std::function<Vec(double t, const Vec& x)>;
using DiffusionFn = std::function<Mat(double t, const Vec& x)>;
using DriverFn = std::function<double(double t, const Vec& x, double y, const RowVec& z)>;
using NoiseFn = std::function<Vec(double t, const Vec& x, double y)>;
/// Terminal functional; receives one point for the single-point case and
/// n + 1 points (partition order t_0, ..., t_n) for the discrete case.
using TerminalFn = std::function<double(std::span<const Vec> points)>;

using DriftJacobianFn = std::function<Mat(double t, const Vec& x)>;
using DiffusionJacobianFn = std::function<MatGrad(double t, const Vec& x)>;
using DriverPartialsFn = std::function<DriverPartials(double t, const Vec& x, double y, const RowVec& z)>;
using NoisePartialsFn = std::function<NoisePartials(double t, const Vec& x, double y)>;
/// One row gradient per terminal point.
using TerminalGradFn = std::function<std::vector<RowVec>(std::span<const Vec> points)>;

/// Coefficients (b, sigma, f, g, l) of the coupled forward/backward system.
/// Times passed to every function are paper-clock times.
struct CoefficientSet {
  int dim = 1;
  DriftFn drift;
  DiffusionFn diffusion;
  DriverFn driver;
  NoiseFn noise;
  TerminalFn terminal;
  int terminal_points = 1;

  DriftJacobianFn drift_x;
  DiffusionJacobianFn diffusion_x;
  DriverPartialsFn driver_partials;
  NoisePartialsFn noise_partials;
  TerminalGradFn terminal_grad;

  double lipschitz_K = 1.0;
  double ellipticity_c = 1.0;

  /// Structural knowledge that lets pipelines skip work; false is always safe.
  bool driver_is_zero = false;
  bool noise_is_zero = false;
  /// Set on coefficient sets produced by mollify().
  bool mollified = false;

  bool discrete_terminal() const { return terminal_points > 1; }
  bool has_forward_partials() const { return static_cast<bool>(drift_x) && static_cast<bool>(diffusion_x); }
  bool has_backward_partials() const {
    return static_cast<bool>(driver_partials) && static_cast<bool>(noise_partials) && static_cast<bool>(terminal_grad);
  }
};

/// Text form of a coefficient set, as read from experiment files.
struct CoefficientExpressions {
  int dim = 1;
  std::vector<std::string> drift;      // d entries
  std::vector<std::string> diffusion;  // d*d entries, row-major
  std::string driver = "0";
  std::vector<std::string> noise;      // d entries
  std::string terminal = "0";
  int terminal_points = 1;
  double lipschitz_K = 1.0;
  double ellipticity_c = 1.0;

  friend bool operator==(const CoefficientExpressions&, const CoefficientExpressions&) = default;
};

/// Variable names used by each coefficient expression for dimension `dim`.
std::vector<std::string> state_variable_names(int dim);
std::vector<std::string> driver_variable_names(int dim);
std::vector<std::string> noise_variable_names(int dim);
std::vector<std::string> terminal_variable_names(int dim, int points);

/// Compiles expressions into a coefficient set with symbolic partials attached.
CoefficientSet coefficients_from_expressions(const CoefficientExpressions& expr);

struct ProbeConfig {
  int count = 64;
  double radius = 4.0;
  std::uint64_t seed = 0x5EED;
  /// Relative slack allowed on Lipschitz quotients.
  double lipschitz_slack = 0.05;
  /// Absolute tolerance for analytic partials against central differences.
  double partial_tolerance = 1e-5;
  double horizon = 1.0;
};

struct CoefficientReport {
  double min_ellipticity_ratio = 0.0;  // min over probes of lambda_min(sigma sigma^T) / c
  double max_lipschitz_ratio = 0.0;    // max over probes of quotient / K
  double max_partial_error = 0.0;      // max |analytic - central difference|
  bool ellipticity_ok = false;
  bool lipschitz_ok = false;
  bool partials_ok = true;
  int partials_checked = 0;
};

CoefficientReport check_coefficients(const CoefficientSet& coeffs, const ProbeConfig& probes = {});

/// Gauss-Hermite rule for E[h(xi)], xi ~ N(0, 1).
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
GaussHermiteRule gauss_hermite(int n);

struct MollifyOptions {
  /// Nodes per smoothed dimension; 0 picks min(64, max(4, floor(4096^(1/D)))).
  int nodes_per_dim = 0;
};

/// Gaussian smoothing of f and l in their spatial arguments with width eps.
///
/// The x-partials of the result are the convolutions against the derivative
/// of the Gaussian kernel; the y- and z-partials of f are central difference
/// quotients of the smoothed driver with step eps (bounded by K).
CoefficientSet mollify(const CoefficientSet& coeffs, double eps, const MollifyOptions& options = {});

/// Central finite-difference fallbacks used when analytic partials are absent.
Mat drift_jacobian_fd(const DriftFn& drift, double t, const Vec& x, double h);
MatGrad diffusion_jacobian_fd(const DiffusionFn& diffusion, double t, const Vec& x, double h);
std::vector<RowVec> terminal_grad_fd(const TerminalFn& terminal, std::span<const Vec> points, double h);

/// Default finite-difference step 1e-4 * (1 + |x|).
double fd_step(const Vec& x);

}  // namespace bdsde
