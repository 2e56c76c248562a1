#include "bdsde/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

namespace bdsde {

SpaceGrid space_grid_around(double center, double sigma_max, double horizon, double spacing, double sigmas) {
  if (!(spacing > 0.0)) throw ValidationError("space grid spacing must be positive");
  const double want = std::max(sigmas * sigma_max * std::sqrt(horizon), 4.0 * spacing);
  const int half = static_cast<int>(std::ceil(want / spacing));
  SpaceGrid g;
  g.center = center;
  g.half_width = half * spacing;
  g.count = 2 * half + 1;
  return g;
}

double GridFunction::operator()(double x) const {
  const int n = grid.count;
  const double h = grid.spacing();
  const double x0 = grid.x(0);
  const double pos = (x - x0) / h;
  if (pos <= 0.0) return values.front();
  if (pos >= n - 1) return values.back();
  const int i = static_cast<int>(std::floor(pos));
  const double t = pos - i;
  if (i < 1 || i + 2 > n - 1) return values[i] + t * (values[i + 1] - values[i]);
  const double p0 = values[i - 1], p1 = values[i], p2 = values[i + 1], p3 = values[i + 2];
  // Cubic through nodes i-1 .. i+2.
  return p0 * (-t * (t - 1) * (t - 2) / 6.0) + p1 * ((t + 1) * (t - 1) * (t - 2) / 2.0) +
         p2 * (-(t + 1) * t * (t - 2) / 2.0) + p3 * ((t + 1) * t * (t - 1) / 6.0);
}

void write_grid_function(std::ostream& os, const GridFunction& f, const std::string& params) {
  os << "# time=" << std::setprecision(17) << f.time;
  if (!params.empty()) os << ' ' << params;
  os << "\nx,value\n";
  for (int i = 0; i < f.grid.count; ++i) os << f.grid.x(i) << ',' << f.values[i] << '\n';
}

namespace {

void require_scalar(const CoefficientSet& c, const SpaceGrid& g) {
  if (c.dim != 1) throw UnsupportedError("PDE oracles are one-dimensional");
  if (c.discrete_terminal()) throw UnsupportedError("PDE oracles need a single-point terminal");
  if (g.count < 5 || g.count % 2 == 0) throw ValidationError("space grid needs an odd node count >= 5");
  if (!(g.half_width > 0.0)) throw ValidationError("space grid half width must be positive");
}

void thomas(std::vector<double>& lo, std::vector<double>& di, std::vector<double>& up, std::vector<double>& rhs) {
  const std::size_t n = di.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double w = lo[i] / di[i - 1];
    di[i] -= w * up[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  rhs[n - 1] /= di[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - up[i] * rhs[i + 1]) / di[i];
}

/// One Crank-Nicolson step from s0 to s0 + dt; boundary nodes keep their values.
void cn_step(const CoefficientSet& c, const SpaceGrid& g, std::vector<double>& u, double s0, double dt, int sweeps) {
  const int n = g.count;
  const double h = g.spacing();
  const double sm = s0 + 0.5 * dt;
  std::vector<double> lo(n, 0.0), di(n, 1.0), up(n, 0.0), sig(n, 0.0);
  std::vector<double> l_lo(n, 0.0), l_di(n, 0.0), l_up(n, 0.0);
  Vec x(1);
  for (int i = 1; i < n - 1; ++i) {
    x(0) = g.x(i);
    const double s = c.diffusion(sm, x)(0, 0);
    const double b = c.drift(sm, x)(0);
    sig[i] = s;
    const double a = 0.5 * s * s / (h * h);
    const double bb = b / (2.0 * h);
    l_lo[i] = a - bb;
    l_di[i] = -2.0 * a;
    l_up[i] = a + bb;
  }
  std::vector<double> explicit_part(n);
  explicit_part[0] = u[0];
  explicit_part[n - 1] = u[n - 1];
  for (int i = 1; i < n - 1; ++i) {
    explicit_part[i] = u[i] + 0.5 * dt * (l_lo[i] * u[i - 1] + l_di[i] * u[i] + l_up[i] * u[i + 1]);
  }
  auto solve_with = [&](const std::vector<double>& lag) {
    std::vector<double> rhs = explicit_part;
    if (!c.driver_is_zero) {
      RowVec z(1);
      for (int i = 1; i < n - 1; ++i) {
        x(0) = g.x(i);
        z(0) = (lag[i + 1] - lag[i - 1]) / (2.0 * h) * sig[i];
        rhs[i] += dt * c.driver(sm, x, lag[i], z);
      }
    }
    for (int i = 0; i < n; ++i) {
      if (i == 0 || i == n - 1) {
        lo[i] = 0.0;
        di[i] = 1.0;
        up[i] = 0.0;
      } else {
        lo[i] = -0.5 * dt * l_lo[i];
        di[i] = 1.0 - 0.5 * dt * l_di[i];
        up[i] = -0.5 * dt * l_up[i];
      }
    }
    thomas(lo, di, up, rhs);
    return rhs;
  };
  std::vector<double> next = solve_with(u);
  if (!c.driver_is_zero) {
    for (int sweep = 0; sweep < sweeps; ++sweep) {
      std::vector<double> mid(n);
      for (int i = 0; i < n; ++i) mid[i] = 0.5 * (u[i] + next[i]);
      next = solve_with(mid);
    }
  }
  u.swap(next);
}

std::vector<double> initial_values(const CoefficientSet& c, const SpaceGrid& g) {
  std::vector<double> u(g.count);
  std::vector<Vec> pt(1, Vec(1));
  for (int i = 0; i < g.count; ++i) {
    pt[0](0) = g.x(i);
    u[i] = c.terminal(pt);
  }
  return u;
}

std::vector<int> output_steps(const PdeOptions& o, double horizon) {
  const double dt = horizon / o.n_time_steps;
  std::vector<int> steps;
  if (o.output_times.empty()) return {o.n_time_steps};
  for (double t : o.output_times) {
    const double pos = t / dt;
    const double r = std::round(pos);
    if (std::abs(pos - r) > 1e-8 * std::max(1.0, pos) || r < 0 || r > o.n_time_steps) {
      throw ValidationError("PDE output time " + std::to_string(t) + " is not a time node");
    }
    steps.push_back(static_cast<int>(r));
  }
  return steps;
}

PdeResult run(const CoefficientSet& c, double horizon, const PdeOptions& o, const std::vector<Vec>* db) {
  require_scalar(c, o.space);
  if (!(horizon > 0.0) || o.n_time_steps < 1) throw ValidationError("PDE horizon and time steps must be positive");
  const double dt = horizon / o.n_time_steps;
  int sub = 1;
  int nb = 0;
  if (db) {
    nb = static_cast<int>(db->size());
    if (nb < 1 || o.n_time_steps % nb != 0) {
      throw ValidationError("SPDE time steps must be a multiple of the number of B increments");
    }
    sub = o.n_time_steps / nb;
  }
  const auto steps = output_steps(o, horizon);
  PdeResult res;
  const double h = o.space.spacing();
  res.accuracy_warning = dt / (h * h) > o.accuracy_ratio_limit;
  res.outputs.resize(steps.size());
  std::vector<double> u = initial_values(c, o.space);
  auto record = [&](int j) {
    for (std::size_t q = 0; q < steps.size(); ++q) {
      if (steps[q] == j) res.outputs[q] = GridFunction{o.space, j * dt, u};
    }
  };
  record(0);
  Vec x(1);
  std::vector<double> step_start;
  for (int j = 0; j < o.n_time_steps; ++j) {
    if (db && j % sub == 0) step_start = u;
    cn_step(c, o.space, u, j * dt, dt, o.corrector_sweeps);
    if (db && !c.noise_is_zero && (j + 1) % sub == 0) {
      // B step q (paper clock) uses reversed increment nb - 1 - q; g sees the values at its start.
      const int q = j / sub;
      const double s_q = q * (horizon / nb);
      const double dbq = (*db)[static_cast<std::size_t>(nb - 1 - q)](0);
      for (int i = 0; i < o.space.count; ++i) {
        x(0) = o.space.x(i);
        u[i] += c.noise(s_q, x, step_start[i])(0) * dbq;
      }
    }
    record(j + 1);
  }
  return res;
}

}  // namespace

PdeResult pde_solve(const CoefficientSet& c, double horizon, const PdeOptions& o) { return run(c, horizon, o, nullptr); }

PdeResult spde_solve_pathwise(const CoefficientSet& c, double horizon, const PdeOptions& o,
                              const std::vector<Vec>& b_increments) {
  return run(c, horizon, o, &b_increments);
}

Vec fd_gradient(const std::function<double(const Vec&)>& field, const Vec& x, double h) {
  if (!(h > 0.0)) throw ValidationError("fd_gradient: h must be positive");
  Vec g(x.size());
  for (int i = 0; i < x.size(); ++i) {
    Vec xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    g(i) = (field(xp) - field(xm)) / (2.0 * h);
  }
  return g;
}

double fd_gradient(const GridFunction& field, double x, double h) {
  if (!(h > 0.0)) throw ValidationError("fd_gradient: h must be positive");
  return (field(x + h) - field(x - h)) / (2.0 * h);
}

namespace {

/// Plain recursion over the binary tree, written without the ensemble,
/// regression or weight code it is used to check.
class Tree {
 public:
  Tree(const ProblemSpec& spec, const CoefficientSet& c, std::vector<Vec> db, const Vec& x0)
      : spec_(spec), c_(c), db_(std::move(db)), n_(spec.n_steps()), d_(spec.dim()), dt_(spec.delta()) {
    sq_ = std::sqrt(dt_);
    x_.resize(n_ + 1);
    x_[0] = {x0};
    for (int k = 0; k < n_; ++k) {
      const std::size_t parents = x_[k].size();
      const std::size_t fan = std::size_t{1} << d_;
      x_[k + 1].resize(parents * fan);
      const double s = spec_.grid.paper_time(k);
      for (std::size_t q = 0; q < parents; ++q) {
        const Vec& xp = x_[k][q];
        const Vec drift = c_.drift(s, xp);
        const Mat sig = c_.diffusion(s, xp);
        for (std::size_t signs = 0; signs < fan; ++signs) {
          const Vec xn = xp + drift * dt_ + sig * shock(signs);
          x_[k + 1][q | (signs << (k * d_))] = xn;
        }
      }
    }
    if (c_.discrete_terminal()) {
      for (int idx : spec_.partition->indices()) nodes_.push_back(n_ - idx);
    } else {
      nodes_.push_back(n_);
    }
  }

  Vec shock(std::size_t signs) const {
    Vec w(d_);
    for (int c = 0; c < d_; ++c) w(c) = ((signs >> c) & 1u) ? sq_ : -sq_;
    return w;
  }

  std::vector<Vec> points(std::size_t leaf) const {
    std::vector<Vec> pts;
    for (int k : nodes_) pts.push_back(x_[k][leaf & mask(k)]);
    return pts;
  }

  std::size_t mask(int k) const { return (std::size_t{1} << (k * d_)) - 1; }

  void backward(TreeResult& r) {
    const std::size_t leaves = x_[n_].size();
    r.y.assign(n_ + 1, {});
    r.z.assign(n_ + 1, {});
    r.y[n_].resize(leaves);
    r.z[n_].resize(leaves);
    const double s_n = spec_.grid.paper_time(n_);
    for (std::size_t q = 0; q < leaves; ++q) {
      const auto pts = points(q);
      r.y[n_][q] = c_.terminal(pts);
      const RowVec dl = c_.terminal_grad ? c_.terminal_grad(pts).front()
                                         : terminal_grad_fd(c_.terminal, pts, fd_step(pts.front())).front();
      r.z[n_][q] = dl * c_.diffusion(s_n, pts.front());
    }
    const std::size_t fan = std::size_t{1} << d_;
    for (int k = n_ - 1; k >= 0; --k) {
      const std::size_t nodes = x_[k].size();
      r.y[k].assign(nodes, 0.0);
      r.z[k].assign(nodes, RowVec::Zero(d_));
      const double s1 = spec_.grid.paper_time(k + 1);
      const double s0 = spec_.grid.paper_time(k);
      for (std::size_t q = 0; q < nodes; ++q) {
        double ey = 0.0;
        RowVec ez = RowVec::Zero(d_);
        for (std::size_t signs = 0; signs < fan; ++signs) {
          const std::size_t ch = q | (signs << (k * d_));
          const Vec& x = x_[k + 1][ch];
          const double y = r.y[k + 1][ch];
          const double f = c_.driver(s1, x, y, r.z[k + 1][ch]);
          const double g = c_.noise(s1, x, y).dot(db_[k]);
          if (spec_.picard_iterations > 0) {
            ey += y + g;
          } else {
            ey += y + f * dt_ + g;
          }
          ez += y * shock(signs).transpose();
        }
        ey /= static_cast<double>(fan);
        ez /= static_cast<double>(fan) * dt_;
        if (spec_.picard_iterations > 0) {
          const double base = ey;
          for (int it = 0; it < spec_.picard_iterations; ++it) ey = base + c_.driver(s0, x_[k][q], ey, ez) * dt_;
        }
        r.y[k][q] = ey;
        r.z[k][q] = ez;
      }
    }
    r.u = r.y[0][0];
  }

  /// Jump of Z at reversed node ki for terminal argument i.
  std::vector<RowVec> jump(const TreeResult& r, int i, int ki) const {
    const std::size_t leaves = x_[n_].size();
    const std::size_t fan = std::size_t{1} << d_;
    std::vector<RowVec> a(leaves);
    std::vector<Mat> b(leaves, Mat::Zero(d_, d_));
    for (std::size_t q = 0; q < leaves; ++q) a[q] = c_.terminal_grad(points(q))[static_cast<std::size_t>(i)];
    for (int k = n_ - 1; k >= ki; --k) {
      const std::size_t nodes = x_[k].size();
      std::vector<RowVec> an(nodes, RowVec::Zero(d_));
      std::vector<Mat> bn(nodes, Mat::Zero(d_, d_));
      const double s1 = spec_.grid.paper_time(k + 1);
      for (std::size_t q = 0; q < nodes; ++q) {
        for (std::size_t signs = 0; signs < fan; ++signs) {
          const std::size_t ch = q | (signs << (k * d_));
          const Vec& x = x_[k + 1][ch];
          const double y = r.y[k + 1][ch];
          const DriverPartials fp = c_.driver_partials(s1, x, y, r.z[k + 1][ch]);
          const NoisePartials gp = c_.noise_partials(s1, x, y);
          an[q] += a[ch] * (1.0 + fp.fy * dt_ + gp.gy.dot(db_[k])) + fp.fz * b[ch] * dt_;
          const Vec w = shock(signs);
          for (int cc = 0; cc < d_; ++cc) bn[q].row(cc) += w(cc) * a[ch];
        }
        an[q] /= static_cast<double>(fan);
        bn[q] /= static_cast<double>(fan) * dt_;
      }
      a.swap(an);
      b.swap(bn);
    }
    std::vector<RowVec> out(a.size());
    const double s = spec_.grid.paper_time(ki);
    for (std::size_t q = 0; q < a.size(); ++q) out[q] = a[q] * c_.diffusion(s, x_[ki][q]);
    return out;
  }

 private:
  const ProblemSpec& spec_;
  const CoefficientSet& c_;
  std::vector<Vec> db_;
  int n_, d_;
  double dt_, sq_;
  std::vector<std::vector<Vec>> x_;
  std::vector<int> nodes_;
};

}  // namespace

TreeResult tree_enumerate(const ProblemSpec& spec, int outer_id, const TreeOptions& options) {
  spec.validate();
  if (spec.noise_mode == NoiseMode::kGaussian) throw ValidationError("tree_enumerate needs Rademacher noise");
  if (spec.n_steps() > kTreeMaxSteps) {
    throw ValidationError("tree_enumerate: n_steps above the enumeration cap of " + std::to_string(kTreeMaxSteps));
  }
  if (spec.noise_master_steps > 0) throw ValidationError("tree_enumerate cannot use noise_master_steps");
  const CoefficientSet c = effective_coefficients(spec);
  const auto db = sample_b_increments(spec, outer_id);

  TreeResult r;
  Tree tree(spec, c, db, spec.x);
  tree.backward(r);

  if (options.gradient) {
    r.grad_u = Vec::Zero(spec.dim());
    for (int i = 0; i < spec.dim(); ++i) {
      const double h = options.bump * (1.0 + std::abs(spec.x(i)));
      Vec xp = spec.x, xm = spec.x;
      xp(i) += h;
      xm(i) -= h;
      TreeResult up, down;
      Tree(spec, c, db, xp).backward(up);
      Tree(spec, c, db, xm).backward(down);
      r.grad_u(i) = (up.u - down.u) / (2.0 * h);
    }
  }
  if (options.jumps && c.discrete_terminal()) {
    if (!c.has_backward_partials()) throw ConfigurationError("tree jumps need partials of f, g and l");
    const Partition& part = *spec.partition;
    for (int i = 1; i < part.n_intervals(); ++i) {
      const int ki = spec.n_steps() - part.indices()[i];
      auto per = tree.jump(r, i, ki);
      RowVec mean = RowVec::Zero(spec.dim());
      for (const auto& v : per) mean += v;
      mean /= static_cast<double>(per.size());
      r.delta_z.push_back(mean);
      r.delta_z_prefix.push_back(std::move(per));
    }
  }
  return r;
}

}  // namespace bdsde
