#include "bdsde/bdsde_solver.hpp"

#include "bdsde/parallel.hpp"

#include <cmath>

namespace bdsde {

std::vector<double> BackwardSolution::y_path(int p) const {
  std::vector<double> out;
  for (int k = 0; k <= n_steps; ++k) out.push_back(y_at(k, p));
  return out;
}

std::vector<RowVec> BackwardSolution::z_path(int p) const {
  std::vector<RowVec> out;
  for (int k = 0; k <= n_steps; ++k) out.push_back(z_at(k, p));
  return out;
}

RowVec VariationalSolution::grad_y_at(int k, int p) const {
  return Eigen::Map<const RowVec>(&grad_y[(static_cast<std::size_t>(k) * n_paths + p) * dim], dim);
}

Mat VariationalSolution::grad_z_at(int k, int p) const {
  using RowMajorMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor, kMaxDim, kMaxDim>;
  return Eigen::Map<const RowMajorMat>(&grad_z[(static_cast<std::size_t>(k) * n_paths + p) * dim * dim], dim, dim);
}

std::vector<Vec> terminal_points(const PathEnsemble& ens, const std::vector<int>& nodes, int p) {
  std::vector<Vec> pts;
  pts.reserve(nodes.size());
  for (int k : nodes) pts.push_back(ens.x_vec(k, p));
  return pts;
}

void sample_moments(const std::vector<double>& s, int n, int m, Eigen::VectorXd& mean, Eigen::VectorXd& se,
                    int threads) {
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(2 * m);
  const Eigen::VectorXd acc = chunked_sum(static_cast<std::size_t>(n), threads, zero, [&](std::size_t b, std::size_t e) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(2 * m);
    for (std::size_t p = b; p < e; ++p)
      for (int c = 0; c < m; ++c) a(c) += s[p * m + c];
    return a;
  });
  mean = acc.head(m) / n;
  // Second pass around the mean for a stable variance.
  const Eigen::VectorXd dev = chunked_sum(static_cast<std::size_t>(n), threads, zero, [&](std::size_t b, std::size_t e) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(2 * m);
    for (std::size_t p = b; p < e; ++p)
      for (int c = 0; c < m; ++c) {
        const double r = s[p * m + c] - mean(c);
        a(c) += r * r;
      }
    return a;
  });
  se.resize(m);
  for (int c = 0; c < m; ++c) se(c) = n > 1 ? std::sqrt(dev(c) / (n - 1) / n) : 0.0;
}

namespace {

RowVec terminal_z(const CoefficientSet& c, double s, const std::vector<Vec>& pts) {
  std::vector<RowVec> grad;
  if (c.terminal_grad) {
    grad = c.terminal_grad(pts);
  } else {
    grad = terminal_grad_fd(c.terminal, pts, fd_step(pts.front()));
  }
  return grad.front() * c.diffusion(s, pts.front());
}

}  // namespace

BackwardSolution solve_bdsde(const ProblemSpec& spec, const CoefficientSet& c, const PathEnsemble& ens) {
  spec.validate();
  const int n = spec.n_steps();
  const int d = spec.dim();
  const int np = ens.n_paths();
  if (ens.n_steps() != n || ens.dim() != d || np != spec.n_inner_paths) {
    throw ValidationError("ensemble was simulated on a different grid");
  }
  const double delta = spec.delta();
  const auto nodes = terminal_nodes(spec);
  const auto cond = make_conditioner(spec, ens);

  BackwardSolution sol;
  sol.n_paths = np;
  sol.n_steps = n;
  sol.dim = d;
  sol.y.assign(static_cast<std::size_t>(n + 1) * np, 0.0);
  sol.z.assign(static_cast<std::size_t>(n + 1) * np * d, 0.0);
  sol.diagnostics.resize(static_cast<std::size_t>(n));
  sol.z_mean_se.assign(static_cast<std::size_t>(n) * d, 0.0);

  // Per-path functional l + sum f delta + sum g dB, for the standard error.
  std::vector<double> functional(static_cast<std::size_t>(np), 0.0);

  const double s_term = spec.grid.paper_time(n);
  parallel_chunks(np, spec.threads, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t pp = b; pp < e; ++pp) {
      const int p = static_cast<int>(pp);
      const auto pts = terminal_points(ens, nodes, p);
      const double l = c.terminal(pts);
      sol.y[sol.idx(n, p)] = l;
      functional[p] = l;
      Eigen::Map<RowVec>(&sol.z[sol.idx(n, p) * d], d) = terminal_z(c, s_term, pts);
    }
  });

  // Y targets carry Y_{k+1} alongside so that the Z regression can use the
  // centred values Y_{k+1} - E[Y_{k+1} | F_k]; with exact conditioning the
  // centring term has zero conditional covariance with dW.
  std::vector<double> work(static_cast<std::size_t>(np) * 2);
  std::vector<double> zwork(static_cast<std::size_t>(np) * d);
  for (int k = n - 1; k >= 0; --k) {
    const double s_next = spec.grid.paper_time(k + 1);
    const Vec& db = ens.db[k];
    parallel_chunks(np, spec.threads, [&](std::size_t, std::size_t b, std::size_t e) {
      for (std::size_t pp = b; pp < e; ++pp) {
        const int p = static_cast<int>(pp);
        const Vec x = ens.x_vec(k + 1, p);
        const double y = sol.y[sol.idx(k + 1, p)];
        const RowVec z = sol.z_at(k + 1, p);
        const double fv = c.driver_is_zero ? 0.0 : c.driver(s_next, x, y, z) * delta;
        const double gv = c.noise_is_zero ? 0.0 : c.noise(s_next, x, y).dot(db);
        functional[p] += fv + gv;
        work[pp * 2] = y + (spec.picard_iterations > 0 ? 0.0 : fv) + gv;
        work[pp * 2 + 1] = y;
      }
    });
    sol.diagnostics[k] = cond->apply(k, work.data(), 2);
    parallel_chunks(np, spec.threads, [&](std::size_t, std::size_t b, std::size_t e) {
      for (std::size_t pp = b; pp < e; ++pp) {
        const int p = static_cast<int>(pp);
        const double centred = sol.y[sol.idx(k + 1, p)] - work[pp * 2 + 1];
        const double* dw = ens.dw(k, p);
        for (int j = 0; j < d; ++j) zwork[pp * d + j] = centred * dw[j] / delta;
      }
    });
    {
      Eigen::VectorXd zm, zs;
      sample_moments(zwork, np, d, zm, zs, spec.threads);
      for (int j = 0; j < d; ++j) sol.z_mean_se[static_cast<std::size_t>(k) * d + j] = zs(j);
    }
    cond->apply(k, zwork.data(), d);
    const double s_k = spec.grid.paper_time(k);
    parallel_chunks(np, spec.threads, [&](std::size_t, std::size_t b, std::size_t e) {
      for (std::size_t pp = b; pp < e; ++pp) {
        const int p = static_cast<int>(pp);
        const RowVec z = Eigen::Map<const RowVec>(&zwork[pp * d], d);
        Eigen::Map<RowVec>(&sol.z[sol.idx(k, p) * d], d) = z;
        double y = work[pp * 2];
        if (spec.picard_iterations > 0 && !c.driver_is_zero) {
          // Fixed point of Y = E[Y_{k+1} + g dB] + f(s_k, X_k, Y, Z_k) delta.
          const Vec x = ens.x_vec(k, p);
          const double base = work[pp * 2];
          for (int it = 0; it < spec.picard_iterations; ++it) y = base + c.driver(s_k, x, y, z) * delta;
        }
        sol.y[sol.idx(k, p)] = y;
      }
    });
  }

  Eigen::VectorXd mean, se;
  sample_moments(sol.y, np, 1, mean, se, spec.threads);  // first np entries are node 0
  sol.u_value = mean(0);
  sample_moments(functional, np, 1, mean, se, spec.threads);
  sol.std_error = se(0);
  return sol;
}

UEstimate evaluate_u(const ProblemSpec& spec, int outer_id) {
  spec.validate();
  if (outer_id < 0) throw ValidationError("outer_id must be non-negative");
  const CoefficientSet c = effective_coefficients(spec);
  const PathEnsemble ens = simulate_ensemble(spec, c, outer_id, false);
  const BackwardSolution sol = solve_bdsde(spec, c, ens);
  return {sol.u_value, sol.std_error, sol.n_paths};
}

namespace {

void require_backward_partials(const CoefficientSet& c) {
  if (!c.has_backward_partials()) {
    throw ConfigurationError(
        "gradient computations need analytic partials of f, g and l; supply them or set mollify_eps");
  }
}

}  // namespace

VariationalSolution solve_variational(const ProblemSpec& spec, const CoefficientSet& c, const PathEnsemble& ens,
                                      const BackwardSolution& base) {
  require_backward_partials(c);
  if (!ens.has_tangent()) throw ConfigurationError("variational solve needs an ensemble with tangent paths");
  if (base.n_paths != ens.n_paths() || base.n_steps != ens.n_steps()) {
    throw ValidationError("base solution does not match the ensemble");
  }
  const int n = spec.n_steps();
  const int d = spec.dim();
  const int np = ens.n_paths();
  const double delta = spec.delta();
  const auto nodes = terminal_nodes(spec);
  const auto cond = make_conditioner(spec, ens);
  using RowMajorMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor, kMaxDim, kMaxDim>;

  VariationalSolution v;
  v.n_paths = np;
  v.n_steps = n;
  v.dim = d;
  v.grad_y.assign(static_cast<std::size_t>(n + 1) * np * d, 0.0);
  v.grad_z.assign(static_cast<std::size_t>(n + 1) * np * d * d, 0.0);
  auto gy = [&](int k, int p) { return &v.grad_y[(static_cast<std::size_t>(k) * np + p) * d]; };
  auto gz = [&](int k, int p) { return &v.grad_z[(static_cast<std::size_t>(k) * np + p) * d * d]; };

  std::vector<double> functional(static_cast<std::size_t>(np) * d, 0.0);
  for (int p = 0; p < np; ++p) {
    const auto pts = terminal_points(ens, nodes, p);
    const auto grads = c.terminal_grad(pts);
    RowVec g = RowVec::Zero(d);
    for (std::size_t j = 0; j < nodes.size(); ++j) g += grads[j] * ens.grad_mat(nodes[j], p);
    Eigen::Map<RowVec>(gy(n, p), d) = g;
    Eigen::Map<RowVec>(&functional[static_cast<std::size_t>(p) * d], d) = g;
  }

  const int m = d + d * d;
  std::vector<double> work(static_cast<std::size_t>(np) * m);
  for (int k = n - 1; k >= 0; --k) {
    const double s1 = spec.grid.paper_time(k + 1);
    const Vec& db = ens.db[k];
    parallel_chunks(np, spec.threads, [&](std::size_t, std::size_t b, std::size_t e) {
      for (std::size_t pp = b; pp < e; ++pp) {
        const int p = static_cast<int>(pp);
        const Vec x = ens.x_vec(k + 1, p);
        const double y = base.y_at(k + 1, p);
        const RowVec z = base.z_at(k + 1, p);
        const Mat G = ens.grad_mat(k + 1, p);
        const RowVec dy = Eigen::Map<const RowVec>(gy(k + 1, p), d);
        const Mat dz = Eigen::Map<const RowMajorMat>(gz(k + 1, p), d, d);
        RowVec drive = RowVec::Zero(d);
        if (!c.driver_is_zero) {
          const DriverPartials fp = c.driver_partials(s1, x, y, z);
          drive = (fp.fx * G + fp.fy * dy + fp.fz * dz) * delta;
        }
        RowVec noise = RowVec::Zero(d);
        if (!c.noise_is_zero) {
          const NoisePartials gp = c.noise_partials(s1, x, y);
          for (int mm = 0; mm < d; ++mm) noise += db(mm) * (gp.gx.row(mm) * G + gp.gy(mm) * dy);
        }
        Eigen::Map<RowVec>(&functional[pp * d], d) += drive + noise;
        const Mat Ginv = ens.grad_inv_mat(k, p);
        double* w = &work[pp * m];
        Eigen::Map<RowVec>(w, d) = (dy + drive + noise) * Ginv;
        const double* dw = ens.dw(k, p);
        const RowVec dyg = dy * Ginv / delta;
        for (int cc = 0; cc < d; ++cc) Eigen::Map<RowVec>(w + d + cc * d, d) = dw[cc] * dyg;
      }
    });
    cond->apply(k, work.data(), m);
    parallel_chunks(np, spec.threads, [&](std::size_t, std::size_t b, std::size_t e) {
      for (std::size_t pp = b; pp < e; ++pp) {
        const int p = static_cast<int>(pp);
        const Mat G = ens.grad_mat(k, p);
        const double* w = &work[pp * m];
        Eigen::Map<RowVec>(gy(k, p), d) = Eigen::Map<const RowVec>(w, d) * G;
        for (int cc = 0; cc < d; ++cc) Eigen::Map<RowVec>(gz(k, p) + cc * d, d) = Eigen::Map<const RowVec>(w + d + cc * d, d) * G;
      }
    });
  }

  Eigen::VectorXd mean, se;
  std::vector<double> first(v.grad_y.begin(), v.grad_y.begin() + static_cast<std::ptrdiff_t>(np) * d);
  sample_moments(first, np, d, mean, se, spec.threads);
  v.grad_u_value = mean;
  sample_moments(functional, np, d, mean, se, spec.threads);
  v.std_error = se;
  return v;
}

JumpSolution solve_jump_system(const ProblemSpec& spec, const CoefficientSet& c, const PathEnsemble& ens,
                               const BackwardSolution& base) {
  if (!c.discrete_terminal() || !spec.partition) {
    throw ConfigurationError("jump system needs a multi-point terminal with a partition");
  }
  require_backward_partials(c);
  const int n = spec.n_steps();
  const int d = spec.dim();
  const int np = ens.n_paths();
  const double delta = spec.delta();
  const auto nodes = terminal_nodes(spec);
  const auto cond = make_conditioner(spec, ens);
  const Partition& part = *spec.partition;

  JumpSolution out;
  for (int i = 1; i < part.n_intervals(); ++i) {
    JumpComponent jc;
    jc.partition_index = i;
    jc.time = part.node_times()[i];
    jc.sim_node = n - part.indices()[i];
    const int ki = jc.sim_node;
    const int len = n - ki + 1;
    jc.alpha.assign(static_cast<std::size_t>(len) * np * d, 0.0);
    jc.beta.assign(static_cast<std::size_t>(len) * np * d * d, 0.0);
    auto al = [&](int k, int p) { return &jc.alpha[(static_cast<std::size_t>(k - ki) * np + p) * d]; };
    auto be = [&](int k, int p) { return &jc.beta[(static_cast<std::size_t>(k - ki) * np + p) * d * d]; };

    for (int p = 0; p < np; ++p) {
      const auto pts = terminal_points(ens, nodes, p);
      Eigen::Map<RowVec>(al(n, p), d) = c.terminal_grad(pts)[static_cast<std::size_t>(i)];
    }
    const int m = d + d * d;
    std::vector<double> work(static_cast<std::size_t>(np) * m);
    for (int k = n - 1; k >= ki; --k) {
      const double s1 = spec.grid.paper_time(k + 1);
      const Vec& db = ens.db[k];
      parallel_chunks(np, spec.threads, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t pp = b; pp < e; ++pp) {
          const int p = static_cast<int>(pp);
          const RowVec a = Eigen::Map<const RowVec>(al(k + 1, p), d);
          RowVec next = a;
          const Vec x = ens.x_vec(k + 1, p);
          const double y = base.y_at(k + 1, p);
          const RowVec z = base.z_at(k + 1, p);
          if (!c.driver_is_zero) {
            using RowMajorMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor, kMaxDim, kMaxDim>;
            const DriverPartials fp = c.driver_partials(s1, x, y, z);
            const Mat bt = Eigen::Map<const RowMajorMat>(be(k + 1, p), d, d);
            next += (fp.fy * a + fp.fz * bt) * delta;
          }
          if (!c.noise_is_zero) next += c.noise_partials(s1, x, y).gy.dot(db) * a;
          double* w = &work[pp * m];
          Eigen::Map<RowVec>(w, d) = next;
          const double* dw = ens.dw(k, p);
          for (int cc = 0; cc < d; ++cc) Eigen::Map<RowVec>(w + d + cc * d, d) = a * (dw[cc] / delta);
        }
      });
      cond->apply(k, work.data(), m);
      for (int p = 0; p < np; ++p) {
        const double* w = &work[static_cast<std::size_t>(p) * m];
        std::copy(w, w + d, al(k, p));
        std::copy(w + d, w + m, be(k, p));
      }
    }
    jc.delta_z.assign(static_cast<std::size_t>(np) * d, 0.0);
    const double s_i = spec.grid.paper_time(ki);
    for (int p = 0; p < np; ++p) {
      const RowVec a = Eigen::Map<const RowVec>(al(ki, p), d);
      Eigen::Map<RowVec>(&jc.delta_z[static_cast<std::size_t>(p) * d], d) = a * c.diffusion(s_i, ens.x_vec(ki, p));
    }
    Eigen::VectorXd mean, se;
    sample_moments(jc.delta_z, np, d, mean, se, spec.threads);
    jc.delta_z_mean = mean.transpose();
    jc.delta_z_se = se.transpose();
    out.jumps.push_back(std::move(jc));
  }
  return out;
}

}  // namespace bdsde
