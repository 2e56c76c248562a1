#include "bdsde/regression.hpp"

#include "bdsde/parallel.hpp"

#include <cmath>
#include <string>

namespace bdsde {

PolynomialBasis::PolynomialBasis(int n_vars, int degree) : n_vars_(n_vars), degree_(degree) {
  if (n_vars < 0 || degree < 0) throw ValidationError("polynomial basis: negative size");
  std::vector<int> e(static_cast<std::size_t>(n_vars), 0);
  // Enumerate by total degree so the constant comes first.
  for (int total = 0; total <= degree; ++total) {
    std::vector<int> cur(static_cast<std::size_t>(n_vars), 0);
    auto rec = [&](auto&& self, int var, int left) -> void {
      if (var == n_vars - 1 || n_vars == 0) {
        if (n_vars == 0) {
          if (left == 0) exponents_.push_back(cur);
          return;
        }
        cur[var] = left;
        exponents_.push_back(cur);
        return;
      }
      for (int p = left; p >= 0; --p) {
        cur[var] = p;
        self(self, var + 1, left - p);
      }
    };
    rec(rec, 0, total);
  }
}

void PolynomialBasis::eval(const double* vars, double* out) const {
  // Powers up to degree per variable, then products.
  double pw[16][9];
  for (int v = 0; v < n_vars_; ++v) {
    pw[v][0] = 1.0;
    for (int p = 1; p <= degree_; ++p) pw[v][p] = pw[v][p - 1] * vars[v];
  }
  for (std::size_t i = 0; i < exponents_.size(); ++i) {
    double prod = 1.0;
    for (int v = 0; v < n_vars_; ++v) prod *= pw[v][exponents_[i][v]];
    out[i] = prod;
  }
}

StepDiagnostics least_squares_project(const double* states, int n, int n_vars, int degree, const double* targets,
                                      int m, double* fitted, int threads) {
  if (n_vars > 16 || degree > 8) throw ValidationError("regression basis too large");
  const std::size_t nn = static_cast<std::size_t>(n);

  // Per-variable mean and spread, reduced in chunk order. Values are shifted by the
  // first path so that constant columns give an exact zero spread.
  Eigen::VectorXd zero_v = Eigen::VectorXd::Zero(2 * n_vars);
  const Eigen::VectorXd mom = chunked_sum(nn, threads, zero_v, [&](std::size_t b, std::size_t e) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(2 * n_vars);
    for (std::size_t p = b; p < e; ++p)
      for (int v = 0; v < n_vars; ++v) {
        const double x = states[p * n_vars + v] - states[v];
        acc(v) += x;
        acc(n_vars + v) += x * x;
      }
    return acc;
  });
  std::vector<int> keep;
  std::vector<double> mean, scale;
  for (int v = 0; v < n_vars; ++v) {
    const double shifted = mom(v) / n;
    const double var = std::max(0.0, mom(n_vars + v) / n - shifted * shifted);
    const double sd = std::sqrt(var);
    const double mu = shifted + states[v];
    if (sd > 1e-10 * (1.0 + std::abs(mu))) {
      keep.push_back(v);
      mean.push_back(mu);
      scale.push_back(1.0 / sd);
    }
  }
  const int nk = static_cast<int>(keep.size());
  const PolynomialBasis basis(nk, keep.empty() ? 0 : degree);
  const int P = basis.size();
  if (P > 256) throw ValidationError("regression basis has " + std::to_string(P) + " terms (limit 256)");

  auto features = [&](std::size_t p, double* phi) {
    double z[16];
    for (int j = 0; j < nk; ++j) z[j] = (states[p * n_vars + keep[j]] - mean[j]) * scale[j];
    basis.eval(z, phi);
  };

  // Normal equations: [G | c] accumulated together.
  Eigen::MatrixXd zero_m = Eigen::MatrixXd::Zero(P, P + m);
  const Eigen::MatrixXd acc = chunked_sum(nn, threads, zero_m, [&](std::size_t b, std::size_t e) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(P, P + m);
    double phi[256];
    for (std::size_t p = b; p < e; ++p) {
      features(p, phi);
      for (int i = 0; i < P; ++i) {
        for (int j = 0; j <= i; ++j) a(i, j) += phi[i] * phi[j];
        for (int c = 0; c < m; ++c) a(i, P + c) += phi[i] * targets[p * m + c];
      }
    }
    return a;
  });
  Eigen::MatrixXd G = acc.leftCols(P) / n;
  G = G.selfadjointView<Eigen::Lower>();
  const Eigen::MatrixXd rhs = acc.rightCols(m) / n;

  StepDiagnostics diag;
  diag.n_features = P;
  Eigen::MatrixXd beta;
  if (P == 1) {
    beta = rhs / G(0, 0);
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    const double lo = es.eigenvalues()(0), hi = es.eigenvalues()(P - 1);
    diag.condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    if (!(diag.condition <= kGramConditionLimit)) {
      throw SolverError("regression Gram matrix condition number " + std::to_string(diag.condition) +
                        " above limit");
    }
    beta = es.eigenvectors() * (es.eigenvalues().cwiseInverse().asDiagonal() * (es.eigenvectors().transpose() * rhs));
  }

  parallel_chunks(nn, threads, [&](std::size_t, std::size_t b, std::size_t e) {
    double phi[256];
    for (std::size_t p = b; p < e; ++p) {
      features(p, phi);
      for (int c = 0; c < m; ++c) {
        double v = 0.0;
        for (int i = 0; i < P; ++i) v += phi[i] * beta(i, c);
        fitted[p * m + c] = v;
      }
    }
  });
  return diag;
}

RegressionConditioner::RegressionConditioner(const PathEnsemble& ens, int degree, std::vector<int> terminal_nodes,
                                             int threads)
    : ens_(ens), degree_(degree), nodes_(std::move(terminal_nodes)), threads_(threads) {}

int RegressionConditioner::state_size(int k) const {
  int extra = 0;
  for (int kj : nodes_)
    if (kj > 0 && kj < k) ++extra;
  return ens_.dim() * (1 + extra);
}

StepDiagnostics RegressionConditioner::apply(int k, double* targets, int m) const {
  const int n = ens_.n_paths();
  const int d = ens_.dim();
  std::vector<int> passed;
  for (int kj : nodes_)
    if (kj > 0 && kj < k) passed.push_back(kj);
  const int nv = state_size(k);
  std::vector<double> states(static_cast<std::size_t>(n) * nv);
  for (int p = 0; p < n; ++p) {
    double* s = &states[static_cast<std::size_t>(p) * nv];
    const double* x = ens_.x(k, p);
    for (int c = 0; c < d; ++c) s[c] = x[c];
    for (std::size_t j = 0; j < passed.size(); ++j) {
      const double* xj = ens_.x(passed[j], p);
      for (int c = 0; c < d; ++c) s[d * (1 + j) + c] = xj[c];
    }
  }
  try {
    return least_squares_project(states.data(), n, nv, degree_, targets, m, targets, threads_);
  } catch (const SolverError& e) {
    throw SolverError(std::string(e.what()) + " at step " + std::to_string(k));
  }
}

PrefixConditioner::PrefixConditioner(int n_paths, int dim) : n_paths_(n_paths), dim_(dim) {}

StepDiagnostics PrefixConditioner::apply(int k, double* targets, int m) const {
  const std::size_t groups = std::size_t{1} << (k * dim_);
  const std::size_t mask = groups - 1;
  std::vector<double> sums(groups * m, 0.0);
  for (int p = 0; p < n_paths_; ++p) {
    const std::size_t g = static_cast<std::size_t>(p) & mask;
    for (int c = 0; c < m; ++c) sums[g * m + c] += targets[static_cast<std::size_t>(p) * m + c];
  }
  const double per_group = static_cast<double>(n_paths_) / static_cast<double>(groups);
  for (int p = 0; p < n_paths_; ++p) {
    const std::size_t g = static_cast<std::size_t>(p) & mask;
    for (int c = 0; c < m; ++c) targets[static_cast<std::size_t>(p) * m + c] = sums[g * m + c] / per_group;
  }
  return {};
}

std::unique_ptr<Conditioner> make_conditioner(const ProblemSpec& spec, const PathEnsemble& ens) {
  if (spec.noise_mode == NoiseMode::kEnumerate) return std::make_unique<PrefixConditioner>(ens.n_paths(), ens.dim());
  return std::make_unique<RegressionConditioner>(ens, spec.regression_degree, terminal_nodes(spec), spec.threads);
}

}  // namespace bdsde
