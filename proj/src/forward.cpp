#include "bdsde/forward.hpp"

#include "bdsde/parallel.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

namespace bdsde {

bool small_inverse(const Mat& m, Mat& inv, double limit) {
  const int d = static_cast<int>(m.rows());
  if (d == 1) {
    const double v = m(0, 0);
    if (v == 0.0 || !std::isfinite(v)) return false;
    inv.resize(1, 1);
    inv(0, 0) = 1.0 / v;
    return true;
  }
  Eigen::JacobiSVD<Mat> svd(m);
  const auto& sv = svd.singularValues();
  if (!(sv(d - 1) > 0.0) || sv(0) / sv(d - 1) > limit) return false;
  inv = m.inverse();
  return true;
}

namespace {

enum class TangentSource { kNone, kAnalytic, kFiniteDifference };

TangentSource tangent_source(const ProblemSpec& spec, const CoefficientSet& c, bool with_tangent) {
  if (!with_tangent) return TangentSource::kNone;
  if (c.has_forward_partials()) return TangentSource::kAnalytic;
  if (spec.allow_fd_tangent) return TangentSource::kFiniteDifference;
  throw ConfigurationError("tangent process needs drift/diffusion partials or allow_fd_tangent");
}

/// One Euler step of X and its tangent at paper time s.
void euler_step(const CoefficientSet& c, TangentSource src, double s, double delta, const Vec& x, const Mat& g,
                const Vec& dw, Vec& x_next, Mat& g_next) {
  const int d = c.dim;
  const Mat sig = c.diffusion(s, x);
  x_next = x + c.drift(s, x) * delta + sig * dw;
  if (src == TangentSource::kNone) return;
  Mat bx;
  MatGrad sx;
  if (src == TangentSource::kAnalytic) {
    bx = c.drift_x(s, x);
    sx = c.diffusion_x(s, x);
  } else {
    const double h = fd_step(x);
    bx = drift_jacobian_fd(c.drift, s, x, h);
    sx = diffusion_jacobian_fd(c.diffusion, s, x, h);
  }
  // A(i, m) = b_x(i, m) delta + sum_j dW_j d(sigma_ij)/dx_m
  Mat a = bx * delta;
  for (int m = 0; m < d; ++m)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) a(i, m) += sx[m](i, j) * dw(j);
  g_next = g + a * g;
}

Mat invert_tangent(const Mat& g, int node) {
  Mat inv;
  if (!small_inverse(g, inv, std::numeric_limits<double>::infinity())) {
    throw SimulationError("tangent process is singular at node " + std::to_string(node));
  }
  return inv;
}

}  // namespace

ForwardBundle simulate_forward(const ProblemSpec& spec, const NoisePath& noise) {
  return simulate_forward(spec, effective_coefficients(spec), noise);
}

ForwardBundle simulate_forward(const ProblemSpec& spec, const CoefficientSet& c, const NoisePath& noise) {
  spec.validate();
  const int n = spec.n_steps();
  const int d = spec.dim();
  if (static_cast<int>(noise.w_increments.size()) != n) throw ValidationError("noise path does not match the grid");
  const TangentSource src = tangent_source(spec, c, true);
  const double delta = spec.delta();

  ForwardBundle fb;
  fb.x_path.resize(n + 1);
  fb.grad_x_path.resize(n + 1);
  fb.grad_x_inv_path.resize(n + 1);
  fb.sigma_path.resize(n + 1);
  fb.sigma_inv_path.resize(n + 1);
  fb.x_path[0] = spec.x;
  fb.grad_x_path[0] = Mat::Identity(d, d);
  for (int k = 0; k < n; ++k) {
    euler_step(c, src, spec.grid.paper_time(k), delta, fb.x_path[k], fb.grad_x_path[k], noise.w_increments[k],
               fb.x_path[k + 1], fb.grad_x_path[k + 1]);
  }
  for (int k = 0; k <= n; ++k) {
    fb.grad_x_inv_path[k] = invert_tangent(fb.grad_x_path[k], k);
    fb.sigma_path[k] = c.diffusion(spec.grid.paper_time(k), fb.x_path[k]);
    Mat inv;
    if (small_inverse(fb.sigma_path[k], inv)) {
      fb.sigma_inv_path[k] = inv;
    } else {
      fb.sigma_inv_path[k] = Mat::Constant(d, d, std::numeric_limits<double>::quiet_NaN());
      if (fb.singular_node < 0) fb.singular_node = k;
    }
  }
  return fb;
}

void require_invertible_sigma(const ForwardBundle& b) {
  if (b.singular_node >= 0) {
    throw SimulationError("diffusion matrix is singular (condition number above limit) at node " +
                          std::to_string(b.singular_node));
  }
}

TangentReport tangent_consistency_check(const ForwardBundle& b) {
  TangentReport r;
  r.min_sigma_singular_value = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < b.grad_x_path.size(); ++k) {
    const Mat& g = b.grad_x_path[k];
    const Mat prod = g * b.grad_x_inv_path[k] - Mat::Identity(g.rows(), g.cols());
    r.max_product_deviation = std::max(r.max_product_deviation, prod.cwiseAbs().maxCoeff());
    Eigen::JacobiSVD<Mat> svd(b.sigma_path[k]);
    r.min_sigma_singular_value = std::min(r.min_sigma_singular_value, svd.singularValues().minCoeff());
  }
  return r;
}

PathEnsemble::PathEnsemble(int n_paths, int n_steps, int dim, bool with_tangent)
    : n_paths_(n_paths), n_steps_(n_steps), dim_(dim) {
  const std::size_t nodes = static_cast<std::size_t>(n_steps + 1) * static_cast<std::size_t>(n_paths);
  x_.assign(nodes * dim, 0.0);
  dw_.assign(static_cast<std::size_t>(n_steps) * n_paths * dim, 0.0);
  if (with_tangent) {
    grad_.assign(nodes * dim * dim, 0.0);
    grad_inv_.assign(nodes * dim * dim, 0.0);
  }
}

Vec PathEnsemble::x_vec(int k, int p) const { return Eigen::Map<const Vec>(x(k, p), dim_); }
Vec PathEnsemble::dw_vec(int k, int p) const { return Eigen::Map<const Vec>(dw(k, p), dim_); }
Mat PathEnsemble::grad_mat(int k, int p) const { return Eigen::Map<const Mat>(grad(k, p), dim_, dim_); }
Mat PathEnsemble::grad_inv_mat(int k, int p) const { return Eigen::Map<const Mat>(grad_inv(k, p), dim_, dim_); }

PathEnsemble simulate_ensemble(const ProblemSpec& spec, const CoefficientSet& c, int outer_id, bool with_tangent) {
  spec.validate();
  const int n = spec.n_steps();
  const int d = spec.dim();
  const int np = spec.n_inner_paths;
  const TangentSource src = tangent_source(spec, c, with_tangent);
  const double delta = spec.delta();

  PathEnsemble e(np, n, d, with_tangent);
  e.outer_id = outer_id;
  e.db = sample_b_increments(spec, outer_id);

  parallel_chunks(static_cast<std::size_t>(np), spec.threads, [&](std::size_t, std::size_t b, std::size_t end) {
    Vec x(d), xn(d), dw(d);
    Mat g = Mat::Identity(d, d), gn(d, d);
    for (std::size_t pp = b; pp < end; ++pp) {
      const int p = static_cast<int>(pp);
      x = spec.x;
      g = Mat::Identity(d, d);
      Eigen::Map<Vec>(e.x(0, p), d) = x;
      if (with_tangent) {
        Eigen::Map<Mat>(e.grad(0, p), d, d) = g;
        Eigen::Map<Mat>(e.grad_inv(0, p), d, d) = g;
      }
      for (int k = 0; k < n; ++k) {
        for (int cc = 0; cc < d; ++cc) dw(cc) = w_increment(spec, outer_id, p, k, cc);
        Eigen::Map<Vec>(e.dw(k, p), d) = dw;
        euler_step(c, src, spec.grid.paper_time(k), delta, x, g, dw, xn, gn);
        x = xn;
        Eigen::Map<Vec>(e.x(k + 1, p), d) = x;
        if (with_tangent) {
          g = gn;
          Eigen::Map<Mat>(e.grad(k + 1, p), d, d) = g;
          Eigen::Map<Mat>(e.grad_inv(k + 1, p), d, d) = invert_tangent(g, k + 1);
        }
      }
    }
  });
  return e;
}

void write_path_dump(std::ostream& os, const ProblemSpec& spec, const ForwardBundle& b) {
  const int d = spec.dim();
  os << "time";
  for (int i = 1; i <= d; ++i) os << ",x" << i;
  for (int i = 1; i <= d; ++i)
    for (int j = 1; j <= d; ++j) os << ",g" << i << j;
  os << '\n' << std::setprecision(17);
  for (std::size_t k = 0; k < b.x_path.size(); ++k) {
    os << spec.grid.paper_time(static_cast<int>(k));
    for (int i = 0; i < d; ++i) os << ',' << b.x_path[k](i);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) os << ',' << b.grad_x_path[k](i, j);
    os << '\n';
  }
}

}  // namespace bdsde
