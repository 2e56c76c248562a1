#include "bdsde/weights.hpp"

#include "bdsde/parallel.hpp"
#include "bdsde/regression.hpp"

#include <cmath>

namespace bdsde {

WeightProcess compute_weights(const ProblemSpec& spec, const ForwardBundle& b, const NoisePath& noise,
                              const std::vector<std::pair<int, int>>& pairs) {
  const int n = spec.n_steps();
  const int d = spec.dim();
  require_invertible_sigma(b);
  WeightProcess wp;
  wp.pairs = pairs;
  for (const auto& [r, s] : pairs) {
    if (r == s) throw ValidationError("weight pair needs r < s; r = s is excluded");
    if (r > s || r < 0 || s > n) throw ValidationError("weight pair out of order or outside the grid");
    Vec m = Vec::Zero(d);
    for (int k = n - s; k < n - r; ++k) m += (b.sigma_inv_path[k] * b.grad_x_path[k]).transpose() * noise.w_increments[k];
    const RowVec nv = m.transpose() * b.grad_x_inv_path[n - s] / ((s - r) * spec.delta());
    wp.m_values.push_back(m);
    wp.n_values.push_back(nv);
  }
  return wp;
}

namespace {

/// Per-path weighted functional anchored at reversed node a, with weight
/// anchors clamped at reversed node `clamp` (a < clamp <= n).
std::vector<double> weighted_functional(const ProblemSpec& spec, const CoefficientSet& c, const PathEnsemble& ens,
                                        const BackwardSolution& base, int a, int clamp) {
  if (!ens.has_tangent()) throw ConfigurationError("weight estimators need an ensemble with tangent paths");
  const int n = spec.n_steps();
  const int d = spec.dim();
  const int np = ens.n_paths();
  const double delta = spec.delta();
  const auto nodes = terminal_nodes(spec);
  std::vector<double> out(static_cast<std::size_t>(np) * d, 0.0);

  parallel_chunks(np, spec.threads, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t pp = b; pp < e; ++pp) {
      const int p = static_cast<int>(pp);
      const Mat ginv_a = ens.grad_inv_mat(a, p);
      Vec m = Vec::Zero(d);
      RowVec nw = RowVec::Zero(d);
      RowVec acc = RowVec::Zero(d);
      for (int k = a; k < n; ++k) {
        const int j = k + 1;
        if (j <= clamp) {
          const double s = spec.grid.paper_time(k);
          Mat sinv;
          if (!small_inverse(c.diffusion(s, ens.x_vec(k, p)), sinv)) {
            throw SimulationError("diffusion matrix is singular at node " + std::to_string(k));
          }
          m += (sinv * ens.grad_mat(k, p)).transpose() * ens.dw_vec(k, p);
          nw = m.transpose() * ginv_a / ((j - a) * delta);
        }
        const double sj = spec.grid.paper_time(j);
        const Vec x = ens.x_vec(j, p);
        const double y = base.y_at(j, p);
        double h = 0.0;
        if (!c.driver_is_zero) h += c.driver(sj, x, y, base.z_at(j, p)) * delta;
        if (!c.noise_is_zero) h += c.noise(sj, x, y).dot(ens.db[k]);
        acc += h * nw;
      }
      // nw now holds N(a -> clamp).
      acc += c.terminal(terminal_points(ens, nodes, p)) * nw;
      Eigen::Map<RowVec>(&out[pp * d], d) = acc;
    }
  });
  return out;
}

WeightEstimate z_estimate(const ProblemSpec& spec, const CoefficientSet& c, const PathEnsemble& ens,
                          const BackwardSolution& base, int s_index, int clamp, std::string anchor) {
  const int n = spec.n_steps();
  const int d = spec.dim();
  const int np = ens.n_paths();
  const int a = n - s_index;
  std::vector<double> f = weighted_functional(spec, c, ens, base, a, clamp);
  std::vector<double> raw(f.size());
  std::vector<double> fitted = f;
  make_conditioner(spec, ens)->apply(a, fitted.data(), d);
  const double s = spec.grid.paper_time(a);
  for (int p = 0; p < np; ++p) {
    const Mat sig = c.diffusion(s, ens.x_vec(a, p));
    const std::size_t o = static_cast<std::size_t>(p) * d;
    Eigen::Map<RowVec>(&fitted[o], d) = Eigen::Map<const RowVec>(&fitted[o], d) * sig;
    Eigen::Map<RowVec>(&raw[o], d) = Eigen::Map<const RowVec>(&f[o], d) * sig;
  }
  Eigen::VectorXd mean, se, raw_mean;
  sample_moments(fitted, np, d, mean, se, spec.threads);
  // The spread of the unregressed functional bounds the error of the mean.
  sample_moments(raw, np, d, raw_mean, se, spec.threads);
  WeightEstimate w;
  w.value = mean;
  w.std_error = se;
  w.n_samples = np;
  w.anchor_time = spec.grid.paper_time(a);
  w.anchor = std::move(anchor);
  w.per_path = std::move(fitted);
  return w;
}

struct Pipeline {
  CoefficientSet coeffs;
  PathEnsemble ens;
  BackwardSolution base;
};

Pipeline run_pipeline(const ProblemSpec& spec, int outer_id) {
  Pipeline pl;
  pl.coeffs = effective_coefficients(spec);
  pl.ens = simulate_ensemble(spec, pl.coeffs, outer_id, true);
  pl.base = solve_bdsde(spec, pl.coeffs, pl.ens);
  return pl;
}

}  // namespace

WeightEstimate estimate_grad_u_weights(const ProblemSpec& spec, const CoefficientSet& c, const PathEnsemble& ens,
                                       const BackwardSolution& base) {
  const auto nodes = terminal_nodes(spec);
  // For a multi-point terminal the anchors clamp at the last interior node.
  const int clamp = nodes.size() > 1 ? nodes[nodes.size() - 2] : spec.n_steps();
  const std::vector<double> f = weighted_functional(spec, c, ens, base, 0, clamp);
  Eigen::VectorXd mean, se;
  sample_moments(f, ens.n_paths(), spec.dim(), mean, se, spec.threads);
  WeightEstimate w;
  w.value = mean;
  w.std_error = se;
  w.n_samples = ens.n_paths();
  w.anchor_time = spec.t;
  w.anchor = "s=t";
  return w;
}

WeightEstimate estimate_grad_u_weights(const ProblemSpec& spec, int outer_id) {
  const Pipeline pl = run_pipeline(spec, outer_id);
  return estimate_grad_u_weights(spec, pl.coeffs, pl.ens, pl.base);
}

WeightEstimate estimate_z_weights(const ProblemSpec& spec, const CoefficientSet& c, const PathEnsemble& ens,
                                  const BackwardSolution& base, int s_index) {
  if (s_index <= 0 || s_index > spec.n_steps()) {
    throw ValidationError("estimate_z_weights: s_index must be in 1..n_steps; Z at s = 0 comes from the solver");
  }
  return z_estimate(spec, c, ens, base, s_index, spec.n_steps(), "r in [0,s)");
}

WeightEstimate estimate_z_weights(const ProblemSpec& spec, int outer_id, int s_index) {
  if (s_index <= 0 || s_index > spec.n_steps()) {
    throw ValidationError("estimate_z_weights: s_index must be in 1..n_steps; Z at s = 0 comes from the solver");
  }
  const Pipeline pl = run_pipeline(spec, outer_id);
  return estimate_z_weights(spec, pl.coeffs, pl.ens, pl.base, s_index);
}

namespace {

/// Reversed-clock clamp node for s_index, validating that s lies strictly inside an interval.
int discrete_clamp(const ProblemSpec& spec, int s_index, std::string& anchor) {
  if (!spec.partition) throw ConfigurationError("estimate_z_discrete needs a partition");
  if (s_index <= 0 || s_index > spec.n_steps()) throw ValidationError("s_index outside the grid");
  const Partition& part = *spec.partition;
  const int i = part.interval_containing(s_index);
  if (i == 0) {
    throw ValidationError("s_index " + std::to_string(s_index) +
                          " is a partition node; evaluate the one-sided limits at the neighbouring nodes");
  }
  anchor = "r clamped to t_" + std::to_string(i - 1);
  return spec.n_steps() - part.indices()[static_cast<std::size_t>(i - 1)];
}

}  // namespace

WeightEstimate estimate_z_discrete(const ProblemSpec& spec, const CoefficientSet& c, const PathEnsemble& ens,
                                   const BackwardSolution& base, int s_index) {
  std::string anchor;
  const int clamp = discrete_clamp(spec, s_index, anchor);
  return z_estimate(spec, c, ens, base, s_index, clamp, anchor);
}

WeightEstimate estimate_z_discrete(const ProblemSpec& spec, int outer_id, int s_index) {
  std::string anchor;
  discrete_clamp(spec, s_index, anchor);
  const Pipeline pl = run_pipeline(spec, outer_id);
  return estimate_z_discrete(spec, pl.coeffs, pl.ens, pl.base, s_index);
}

VariationalPath variational_path(const VariationalSolution& v, int p) {
  VariationalPath out;
  for (int k = 0; k <= v.n_steps; ++k) {
    out.grad_y.push_back(v.grad_y_at(k, p));
    out.grad_z.push_back(v.grad_z_at(k, p));
  }
  return out;
}

MalliavinDerivative malliavin_derivative(const ForwardBundle& b, int s, int r, const VariationalPath* v) {
  const int n = static_cast<int>(b.x_path.size()) - 1;
  if (s < 0 || r < 0 || s > n || r > n) throw ValidationError("malliavin_derivative: index outside the grid");
  const int d = static_cast<int>(b.x_path.front().size());
  MalliavinDerivative out;
  if (s > r) {
    out.dx = Mat::Zero(d, d);
    if (v) {
      out.dy = RowVec::Zero(d);
      out.dz = Mat::Zero(d, d);
    }
    return out;
  }
  const Mat kernel = b.grad_x_inv_path[s] * b.sigma_path[s];
  out.dx = b.grad_x_path[r] * kernel;
  if (v) {
    out.dy = v->grad_y[r] * kernel;
    out.dz = v->grad_z[r] * kernel;
  }
  return out;
}

}  // namespace bdsde
