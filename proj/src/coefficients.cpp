#include "bdsde/coefficients.hpp"

#include "bdsde/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numbers>

namespace bdsde {

namespace {

std::vector<std::string> indexed(const std::string& base, int dim) {
  if (dim == 1) return {base};
  std::vector<std::string> out;
  for (int i = 1; i <= dim; ++i) out.push_back(base + std::to_string(i));
  return out;
}

void require_dim(int dim) {
  if (dim < 1 || dim > kMaxDim) {
    throw ValidationError("dimension must be in 1.." + std::to_string(kMaxDim) + ", got " + std::to_string(dim));
  }
}

using ExprList = std::shared_ptr<const std::vector<Expression>>;

ExprList compile_list(const std::vector<std::string>& texts, const std::vector<std::string>& vars) {
  auto out = std::make_shared<std::vector<Expression>>();
  out->reserve(texts.size());
  for (const auto& t : texts) out->push_back(Expression::parse(t, vars));
  return out;
}

ExprList derive_list(const std::vector<Expression>& exprs, int var) {
  auto out = std::make_shared<std::vector<Expression>>();
  out->reserve(exprs.size());
  for (const auto& e : exprs) out->push_back(e.derivative(var));
  return out;
}

// Scratch buffer large enough for any variable table (t, x, y, z or all terminal points).
using VarBuf = std::array<double, 2 * kMaxDim + 2 + kMaxDim * 64>;

}  // namespace

std::vector<std::string> state_variable_names(int dim) {
  std::vector<std::string> v{"t"};
  for (auto& s : indexed("x", dim)) v.push_back(s);
  return v;
}

std::vector<std::string> driver_variable_names(int dim) {
  auto v = state_variable_names(dim);
  v.push_back("y");
  for (auto& s : indexed("z", dim)) v.push_back(s);
  return v;
}

std::vector<std::string> noise_variable_names(int dim) {
  auto v = state_variable_names(dim);
  v.push_back("y");
  return v;
}

std::vector<std::string> terminal_variable_names(int dim, int points) {
  if (points <= 1) return indexed("x", dim);
  std::vector<std::string> v;
  for (int j = 0; j < points; ++j) {
    if (dim == 1) {
      v.push_back("x" + std::to_string(j));
    } else {
      for (int c = 1; c <= dim; ++c) v.push_back("x" + std::to_string(j) + "_" + std::to_string(c));
    }
  }
  return v;
}

CoefficientSet coefficients_from_expressions(const CoefficientExpressions& ex) {
  const int d = ex.dim;
  require_dim(d);
  if (static_cast<int>(ex.drift.size()) != d) throw ConfigurationError("drift needs " + std::to_string(d) + " entries");
  if (static_cast<int>(ex.diffusion.size()) != d * d) {
    throw ConfigurationError("diffusion needs " + std::to_string(d * d) + " entries (row-major)");
  }
  if (static_cast<int>(ex.noise.size()) != d) throw ConfigurationError("noise needs " + std::to_string(d) + " entries");
  if (ex.terminal_points < 1 || d * ex.terminal_points > kMaxDim * 64) {
    throw ConfigurationError("terminal_points out of range");
  }

  const auto svars = state_variable_names(d);
  const auto dvars = driver_variable_names(d);
  const auto nvars = noise_variable_names(d);
  const auto tvars = terminal_variable_names(d, ex.terminal_points);

  CoefficientSet c;
  c.dim = d;
  c.terminal_points = ex.terminal_points;
  c.lipschitz_K = ex.lipschitz_K;
  c.ellipticity_c = ex.ellipticity_c;

  // Drift and its Jacobian.
  const ExprList drift = compile_list(ex.drift, svars);
  auto drift_jac = std::make_shared<std::vector<ExprList>>();
  for (int m = 0; m < d; ++m) drift_jac->push_back(derive_list(*drift, 1 + m));
  c.drift = [drift, d](double t, const Vec& x) {
    VarBuf v;
    v[0] = t;
    for (int i = 0; i < d; ++i) v[1 + i] = x(i);
    Vec out(d);
    for (int i = 0; i < d; ++i) out(i) = (*drift)[i].eval(v);
    return out;
  };
  c.drift_x = [drift_jac, d](double t, const Vec& x) {
    VarBuf v;
    v[0] = t;
    for (int i = 0; i < d; ++i) v[1 + i] = x(i);
    Mat out(d, d);
    for (int m = 0; m < d; ++m)
      for (int i = 0; i < d; ++i) out(i, m) = (*(*drift_jac)[m])[i].eval(v);
    return out;
  };

  // Diffusion and its spatial derivatives.
  const ExprList diff = compile_list(ex.diffusion, svars);
  auto diff_jac = std::make_shared<std::vector<ExprList>>();
  for (int m = 0; m < d; ++m) diff_jac->push_back(derive_list(*diff, 1 + m));
  c.diffusion = [diff, d](double t, const Vec& x) {
    VarBuf v;
    v[0] = t;
    for (int i = 0; i < d; ++i) v[1 + i] = x(i);
    Mat out(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) out(i, j) = (*diff)[i * d + j].eval(v);
    return out;
  };
  c.diffusion_x = [diff_jac, d](double t, const Vec& x) {
    VarBuf v;
    v[0] = t;
    for (int i = 0; i < d; ++i) v[1 + i] = x(i);
    MatGrad out;
    for (int m = 0; m < d; ++m) {
      out[m].resize(d, d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) out[m](i, j) = (*(*diff_jac)[m])[i * d + j].eval(v);
    }
    return out;
  };

  // Driver f(t, x, y, z).
  const auto driver = std::make_shared<const Expression>(Expression::parse(ex.driver, dvars));
  auto driver_d = std::make_shared<std::vector<Expression>>();
  for (int s = 1; s < static_cast<int>(dvars.size()); ++s) driver_d->push_back(driver->derivative(s));
  c.driver_is_zero = driver->is_constant() && driver->constant_value() == 0.0;
  auto fill_driver = [d](VarBuf& v, double t, const Vec& x, double y, const RowVec& z) {
    v[0] = t;
    for (int i = 0; i < d; ++i) v[1 + i] = x(i);
    v[1 + d] = y;
    for (int i = 0; i < d; ++i) v[2 + d + i] = z(i);
  };
  c.driver = [driver, fill_driver](double t, const Vec& x, double y, const RowVec& z) {
    VarBuf v;
    fill_driver(v, t, x, y, z);
    return driver->eval(v);
  };
  std::shared_ptr<const std::vector<Expression>> driver_dc = driver_d;
  c.driver_partials = [driver_dc, fill_driver, d](double t, const Vec& x, double y, const RowVec& z) {
    VarBuf v;
    fill_driver(v, t, x, y, z);
    DriverPartials p;
    p.fx.resize(d);
    p.fz.resize(d);
    for (int i = 0; i < d; ++i) p.fx(i) = (*driver_dc)[i].eval(v);
    p.fy = (*driver_dc)[d].eval(v);
    for (int i = 0; i < d; ++i) p.fz(i) = (*driver_dc)[d + 1 + i].eval(v);
    return p;
  };

  // Noise coefficient g(t, x, y).
  const ExprList noise = compile_list(ex.noise, nvars);
  c.noise_is_zero = std::all_of(noise->begin(), noise->end(),
                                [](const Expression& e) { return e.is_constant() && e.constant_value() == 0.0; });
  auto noise_d = std::make_shared<std::vector<ExprList>>();
  for (int s = 1; s <= d + 1; ++s) noise_d->push_back(derive_list(*noise, s));
  c.noise = [noise, d](double t, const Vec& x, double y) {
    VarBuf v;
    v[0] = t;
    for (int i = 0; i < d; ++i) v[1 + i] = x(i);
    v[1 + d] = y;
    Vec out(d);
    for (int m = 0; m < d; ++m) out(m) = (*noise)[m].eval(v);
    return out;
  };
  c.noise_partials = [noise_d, d](double t, const Vec& x, double y) {
    VarBuf v;
    v[0] = t;
    for (int i = 0; i < d; ++i) v[1 + i] = x(i);
    v[1 + d] = y;
    NoisePartials p;
    p.gx.resize(d, d);
    p.gy.resize(d);
    for (int m = 0; m < d; ++m) {
      for (int j = 0; j < d; ++j) p.gx(m, j) = (*(*noise_d)[j])[m].eval(v);
      p.gy(m) = (*(*noise_d)[d])[m].eval(v);
    }
    return p;
  };

  // Terminal functional.
  const int np = ex.terminal_points;
  const auto term = std::make_shared<const Expression>(Expression::parse(ex.terminal, tvars));
  auto term_d = std::make_shared<std::vector<Expression>>();
  for (int s = 0; s < d * np; ++s) term_d->push_back(term->derivative(s));
  std::shared_ptr<const std::vector<Expression>> term_dc = term_d;
  c.terminal = [term, d, np](std::span<const Vec> pts) {
    VarBuf v;
    for (int j = 0; j < np; ++j)
      for (int i = 0; i < d; ++i) v[j * d + i] = pts[j](i);
    return term->eval(std::span<const double>(v.data(), static_cast<std::size_t>(d * np)));
  };
  c.terminal_grad = [term_dc, d, np](std::span<const Vec> pts) {
    VarBuf v;
    for (int j = 0; j < np; ++j)
      for (int i = 0; i < d; ++i) v[j * d + i] = pts[j](i);
    std::vector<RowVec> out(static_cast<std::size_t>(np), RowVec::Zero(d));
    for (int j = 0; j < np; ++j)
      for (int i = 0; i < d; ++i)
        out[j](i) = (*term_dc)[j * d + i].eval(std::span<const double>(v.data(), static_cast<std::size_t>(d * np)));
    return out;
  };
  return c;
}

double fd_step(const Vec& x) { return 1e-4 * (1.0 + x.norm()); }

Mat drift_jacobian_fd(const DriftFn& drift, double t, const Vec& x, double h) {
  const int d = static_cast<int>(x.size());
  Mat out(d, d);
  for (int m = 0; m < d; ++m) {
    Vec xp = x, xm = x;
    xp(m) += h;
    xm(m) -= h;
    out.col(m) = (drift(t, xp) - drift(t, xm)) / (2.0 * h);
  }
  return out;
}

MatGrad diffusion_jacobian_fd(const DiffusionFn& diffusion, double t, const Vec& x, double h) {
  const int d = static_cast<int>(x.size());
  MatGrad out;
  for (int m = 0; m < d; ++m) {
    Vec xp = x, xm = x;
    xp(m) += h;
    xm(m) -= h;
    out[m] = (diffusion(t, xp) - diffusion(t, xm)) / (2.0 * h);
  }
  return out;
}

std::vector<RowVec> terminal_grad_fd(const TerminalFn& terminal, std::span<const Vec> points, double h) {
  std::vector<Vec> pts(points.begin(), points.end());
  std::vector<RowVec> out;
  for (std::size_t j = 0; j < pts.size(); ++j) {
    const int d = static_cast<int>(pts[j].size());
    RowVec g(d);
    for (int i = 0; i < d; ++i) {
      const double keep = pts[j](i);
      pts[j](i) = keep + h;
      const double up = terminal(pts);
      pts[j](i) = keep - h;
      const double down = terminal(pts);
      pts[j](i) = keep;
      g(i) = (up - down) / (2.0 * h);
    }
    out.push_back(g);
  }
  return out;
}

namespace {

class ProbeStream {
 public:
  explicit ProbeStream(std::uint64_t seed) : seed_(seed) {}
  double uniform(double lo, double hi) {
    const auto w = raw_words(seed_, Stream::kAux, counter_++, 0, 0, 0);
    return lo + (hi - lo) * uniform_open(w[0], w[1]);
  }
  Vec vec(int d, double r) {
    Vec v(d);
    for (int i = 0; i < d; ++i) v(i) = uniform(-r, r);
    return v;
  }

 private:
  std::uint64_t seed_;
  std::uint32_t counter_ = 0;
};

double rel_err(double analytic, double fd) { return std::abs(analytic - fd) / std::max(1.0, std::abs(fd)); }

}  // namespace

CoefficientReport check_coefficients(const CoefficientSet& c, const ProbeConfig& cfg) {
  const int d = c.dim;
  CoefficientReport rep;
  rep.min_ellipticity_ratio = std::numeric_limits<double>::infinity();
  ProbeStream rs(cfg.seed);
  const double K = c.lipschitz_K;
  const double h = 1e-5;

  for (int p = 0; p < cfg.count; ++p) {
    const double t = rs.uniform(0.0, cfg.horizon);
    const Vec x = rs.vec(d, cfg.radius);
    const double y = rs.uniform(-cfg.radius, cfg.radius);
    const Vec zc = rs.vec(d, cfg.radius);
    const RowVec z = zc.transpose();

    // Ellipticity: lambda_min(sigma sigma^T) >= c.
    const Mat sig = c.diffusion(t, x);
    const Mat a = sig * sig.transpose();
    Eigen::SelfAdjointEigenSolver<Mat> es(a);
    rep.min_ellipticity_ratio = std::min(rep.min_ellipticity_ratio, es.eigenvalues().minCoeff() / c.ellipticity_c);

    // Lipschitz quotients on a random pair at a random separation.
    const double sep = cfg.radius * std::pow(10.0, rs.uniform(-3.0, 0.0));
    Vec dir = rs.vec(d, 1.0);
    if (dir.norm() == 0.0) dir = Vec::Ones(d);
    dir /= dir.norm();
    const Vec x2 = x + sep * dir;
    double q = (c.drift(t, x) - c.drift(t, x2)).norm() / sep;
    q = std::max(q, (c.diffusion(t, x) - c.diffusion(t, x2)).norm() / sep);
    {
      const double dy = sep * rs.uniform(-1.0, 1.0);
      const Vec dzc = rs.vec(d, sep);
      const RowVec z2 = z + dzc.transpose();
      const double dist = std::sqrt((x2 - x).squaredNorm() + dy * dy + dzc.squaredNorm());
      q = std::max(q, std::abs(c.driver(t, x, y, z) - c.driver(t, x2, y + dy, z2)) / dist);
    }
    {
      std::vector<Vec> p1, p2;
      double dist2 = 0.0;
      for (int j = 0; j < c.terminal_points; ++j) {
        p1.push_back(rs.vec(d, cfg.radius));
        Vec off = rs.vec(d, 1.0);
        if (off.norm() == 0.0) off = Vec::Ones(d);
        off *= sep / (off.norm() * std::sqrt(static_cast<double>(c.terminal_points)));
        p2.push_back(p1.back() + off);
        dist2 += off.squaredNorm();
      }
      q = std::max(q, std::abs(c.terminal(p1) - c.terminal(p2)) / std::sqrt(dist2));
    }
    rep.max_lipschitz_ratio = std::max(rep.max_lipschitz_ratio, q / K);

    // Analytic partials against central differences.
    if (c.drift_x) {
      const Mat an = c.drift_x(t, x);
      const Mat fd = drift_jacobian_fd(c.drift, t, x, h);
      for (int i = 0; i < an.size(); ++i) rep.max_partial_error = std::max(rep.max_partial_error, rel_err(an(i), fd(i)));
      ++rep.partials_checked;
    }
    if (c.diffusion_x) {
      const MatGrad an = c.diffusion_x(t, x);
      const MatGrad fd = diffusion_jacobian_fd(c.diffusion, t, x, h);
      for (int m = 0; m < d; ++m)
        for (int i = 0; i < an[m].size(); ++i)
          rep.max_partial_error = std::max(rep.max_partial_error, rel_err(an[m](i), fd[m](i)));
      ++rep.partials_checked;
    }
    if (c.driver_partials) {
      const DriverPartials an = c.driver_partials(t, x, y, z);
      for (int i = 0; i < d; ++i) {
        Vec xp = x, xm = x;
        xp(i) += h;
        xm(i) -= h;
        const double fd = (c.driver(t, xp, y, z) - c.driver(t, xm, y, z)) / (2 * h);
        rep.max_partial_error = std::max(rep.max_partial_error, rel_err(an.fx(i), fd));
        RowVec zp = z, zm = z;
        zp(i) += h;
        zm(i) -= h;
        const double fdz = (c.driver(t, x, y, zp) - c.driver(t, x, y, zm)) / (2 * h);
        rep.max_partial_error = std::max(rep.max_partial_error, rel_err(an.fz(i), fdz));
      }
      const double fdy = (c.driver(t, x, y + h, z) - c.driver(t, x, y - h, z)) / (2 * h);
      rep.max_partial_error = std::max(rep.max_partial_error, rel_err(an.fy, fdy));
      ++rep.partials_checked;
    }
    if (c.noise_partials) {
      const NoisePartials an = c.noise_partials(t, x, y);
      for (int j = 0; j < d; ++j) {
        Vec xp = x, xm = x;
        xp(j) += h;
        xm(j) -= h;
        const Vec fd = (c.noise(t, xp, y) - c.noise(t, xm, y)) / (2 * h);
        for (int m = 0; m < d; ++m) rep.max_partial_error = std::max(rep.max_partial_error, rel_err(an.gx(m, j), fd(m)));
      }
      const Vec fdy = (c.noise(t, x, y + h) - c.noise(t, x, y - h)) / (2 * h);
      for (int m = 0; m < d; ++m) rep.max_partial_error = std::max(rep.max_partial_error, rel_err(an.gy(m), fdy(m)));
      ++rep.partials_checked;
    }
    if (c.terminal_grad) {
      std::vector<Vec> pts;
      for (int j = 0; j < c.terminal_points; ++j) pts.push_back(rs.vec(d, cfg.radius));
      const auto an = c.terminal_grad(pts);
      const auto fd = terminal_grad_fd(c.terminal, pts, h);
      for (std::size_t j = 0; j < an.size(); ++j)
        for (int i = 0; i < d; ++i) rep.max_partial_error = std::max(rep.max_partial_error, rel_err(an[j](i), fd[j](i)));
      ++rep.partials_checked;
    }
  }
  rep.ellipticity_ok = rep.min_ellipticity_ratio >= 1.0 - 1e-12;
  rep.lipschitz_ok = rep.max_lipschitz_ratio <= 1.0 + cfg.lipschitz_slack;
  rep.partials_ok = rep.max_partial_error <= cfg.partial_tolerance;
  return rep;
}

GaussHermiteRule gauss_hermite(int n) {
  if (n < 1) throw ValidationError("gauss_hermite: need at least one node");
  // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite polynomials.
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    J(i, i - 1) = std::sqrt(static_cast<double>(i));
    J(i - 1, i) = J(i, i - 1);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  GaussHermiteRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = es.eigenvalues()(i);
    const double v0 = es.eigenvectors()(0, i);
    rule.weights[i] = v0 * v0;
    total += rule.weights[i];
  }
  for (double& w : rule.weights) w /= total;
  // Symmetrize so that odd moments vanish to rounding.
  for (int i = 0; i < n / 2; ++i) {
    const double node = 0.5 * (rule.nodes[n - 1 - i] - rule.nodes[i]);
    const double w = 0.5 * (rule.weights[i] + rule.weights[n - 1 - i]);
    rule.nodes[i] = -node;
    rule.nodes[n - 1 - i] = node;
    rule.weights[i] = rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

namespace {

/// Tensor-product rule over `dims` dimensions; flattened nodes and weights.
struct TensorRule {
  int dims = 0;
  std::vector<double> nodes;  // count x dims
  std::vector<double> weights;
  std::size_t count() const { return weights.size(); }
};

TensorRule tensor_rule(int dims, int per_dim) {
  const GaussHermiteRule r = gauss_hermite(per_dim);
  TensorRule t;
  t.dims = dims;
  std::size_t total = 1;
  for (int i = 0; i < dims; ++i) total *= static_cast<std::size_t>(per_dim);
  t.nodes.resize(total * static_cast<std::size_t>(dims));
  t.weights.resize(total);
  std::vector<int> idx(static_cast<std::size_t>(dims), 0);
  for (std::size_t k = 0; k < total; ++k) {
    double w = 1.0;
    for (int i = 0; i < dims; ++i) {
      t.nodes[k * dims + i] = r.nodes[idx[i]];
      w *= r.weights[idx[i]];
    }
    t.weights[k] = w;
    for (int i = 0; i < dims; ++i) {
      if (++idx[i] < per_dim) break;
      idx[i] = 0;
    }
  }
  return t;
}

int default_nodes(int dims) {
  const int n = static_cast<int>(std::floor(std::pow(4096.0, 1.0 / dims) + 1e-9));
  return std::min(64, std::max(4, n));
}

}  // namespace

CoefficientSet mollify(const CoefficientSet& coeffs, double eps, const MollifyOptions& options) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw ValidationError("mollify: eps must be positive");
  if (!coeffs.driver || !coeffs.terminal) throw ConfigurationError("mollify: driver and terminal must be defined");

  const int d = coeffs.dim;
  const int np = coeffs.terminal_points;
  const auto f_rule = std::make_shared<const TensorRule>(
      tensor_rule(d, options.nodes_per_dim > 0 ? options.nodes_per_dim : default_nodes(d)));
  const auto l_rule = std::make_shared<const TensorRule>(
      tensor_rule(d * np, options.nodes_per_dim > 0 ? options.nodes_per_dim : default_nodes(d * np)));

  CoefficientSet out = coeffs;
  out.mollified = true;

  const DriverFn f = coeffs.driver;
  auto smooth_f = [f, f_rule, eps, d](double t, const Vec& x, double y, const RowVec& z, RowVec* grad_x) {
    double acc = 0.0;
    RowVec gx = RowVec::Zero(d);
    Vec xs(d);
    for (std::size_t k = 0; k < f_rule->count(); ++k) {
      const double* xi = &f_rule->nodes[k * d];
      for (int i = 0; i < d; ++i) xs(i) = x(i) + eps * xi[i];
      const double v = f_rule->weights[k] * f(t, xs, y, z);
      acc += v;
      if (grad_x) {
        for (int i = 0; i < d; ++i) gx(i) += v * xi[i];
      }
    }
    if (grad_x) *grad_x = gx / eps;
    return acc;
  };
  if (!coeffs.driver_is_zero) {
    out.driver = [smooth_f](double t, const Vec& x, double y, const RowVec& z) {
      return smooth_f(t, x, y, z, nullptr);
    };
    out.driver_partials = [smooth_f, eps, d](double t, const Vec& x, double y, const RowVec& z) {
      DriverPartials p;
      smooth_f(t, x, y, z, &p.fx);
      p.fy = (smooth_f(t, x, y + eps, z, nullptr) - smooth_f(t, x, y - eps, z, nullptr)) / (2.0 * eps);
      p.fz.resize(d);
      for (int i = 0; i < d; ++i) {
        RowVec zp = z, zm = z;
        zp(i) += eps;
        zm(i) -= eps;
        p.fz(i) = (smooth_f(t, x, y, zp, nullptr) - smooth_f(t, x, y, zm, nullptr)) / (2.0 * eps);
      }
      return p;
    };
  } else if (!out.driver_partials) {
    out.driver_partials = [d](double, const Vec&, double, const RowVec&) {
      return DriverPartials{RowVec::Zero(d), 0.0, RowVec::Zero(d)};
    };
  }

  const TerminalFn l = coeffs.terminal;
  auto smooth_l = [l, l_rule, eps, d, np](std::span<const Vec> pts, std::vector<RowVec>* grad) {
    double acc = 0.0;
    const int dims = d * np;
    std::vector<double> g(static_cast<std::size_t>(dims), 0.0);
    std::vector<Vec> shifted(pts.begin(), pts.end());
    for (std::size_t k = 0; k < l_rule->count(); ++k) {
      const double* xi = &l_rule->nodes[k * dims];
      for (int j = 0; j < np; ++j)
        for (int i = 0; i < d; ++i) shifted[j](i) = pts[j](i) + eps * xi[j * d + i];
      const double v = l_rule->weights[k] * l(shifted);
      acc += v;
      if (grad) {
        for (int s = 0; s < dims; ++s) g[s] += v * xi[s];
      }
    }
    if (grad) {
      grad->assign(static_cast<std::size_t>(np), RowVec::Zero(d));
      for (int j = 0; j < np; ++j)
        for (int i = 0; i < d; ++i) (*grad)[j](i) = g[j * d + i] / eps;
    }
    return acc;
  };
  out.terminal = [smooth_l](std::span<const Vec> pts) { return smooth_l(pts, nullptr); };
  out.terminal_grad = [smooth_l](std::span<const Vec> pts) {
    std::vector<RowVec> g;
    smooth_l(pts, &g);
    return g;
  };
  return out;
}

}  // namespace bdsde
