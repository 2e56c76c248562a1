#pragma once

#include "bdsde/forward.hpp"
#include "bdsde/problem.hpp"

#include <memory>
#include <vector>

namespace bdsde {

/// Monomials of total degree <= degree in n_vars variables, constant first.
class PolynomialBasis {
 public:
  PolynomialBasis(int n_vars, int degree);

  int size() const { return static_cast<int>(exponents_.size()); }
  int n_vars() const { return n_vars_; }
  const std::vector<std::vector<int>>& exponents() const { return exponents_; }
  void eval(const double* vars, double* out) const;

 private:
  int n_vars_;
  int degree_;
  std::vector<std::vector<int>> exponents_;
};

struct StepDiagnostics {
  double condition = 1.0;  // Gram matrix condition number (1 for plain averages)
  int n_features = 1;
};

inline constexpr double kGramConditionLimit = 1e14;

/// Least-squares projection of m target columns onto polynomials of the
/// state. states is n x n_vars, targets and fitted are n x m, all row-major.
/// Variables with (numerically) zero spread are dropped; when none remain
/// the projection is the plain average. `fitted` may alias `targets`.
StepDiagnostics least_squares_project(const double* states, int n, int n_vars, int degree, const double* targets,
                                      int m, double* fitted, int threads);

/// Conditional expectation given the simulation-clock filtration at node k,
/// realised on one inner ensemble.
class Conditioner {
 public:
  virtual ~Conditioner() = default;
  /// Replaces the n x m row-major targets by their projection.
  virtual StepDiagnostics apply(int k, double* targets, int m) const = 0;
  /// Evaluates the Markov state at node k for path p (size state_size(k)).
  virtual int state_size(int k) const = 0;
};

/// Regression on X_k together with X at partition nodes already passed on the
/// reversed clock (the terminal functional depends on them).
class RegressionConditioner final : public Conditioner {
 public:
  RegressionConditioner(const PathEnsemble& ens, int degree, std::vector<int> terminal_nodes, int threads);
  StepDiagnostics apply(int k, double* targets, int m) const override;
  int state_size(int k) const override;

 private:
  const PathEnsemble& ens_;
  int degree_;
  std::vector<int> nodes_;
  int threads_;
};

/// Exact conditional expectation for enumerate-mode ensembles: paths sharing
/// the first k steps of W signs are averaged.
class PrefixConditioner final : public Conditioner {
 public:
  PrefixConditioner(int n_paths, int dim);
  StepDiagnostics apply(int k, double* targets, int m) const override;
  int state_size(int) const override { return 0; }

 private:
  int n_paths_;
  int dim_;
};

std::unique_ptr<Conditioner> make_conditioner(const ProblemSpec& spec, const PathEnsemble& ens);

}  // namespace bdsde
