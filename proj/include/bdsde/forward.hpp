#pragma once

#include "bdsde/coefficients.hpp"
#include "bdsde/problem.hpp"

#include <iosfwd>
#include <vector>

namespace bdsde {

/// Forward diffusion on the reversed clock: entry k is paper time t - k * delta.
struct ForwardBundle {
  std::vector<Vec> x_path;
  std::vector<Mat> grad_x_path;
  std::vector<Mat> grad_x_inv_path;
  std::vector<Mat> sigma_path;
  /// Filled only where sigma is invertible; see singular_node.
  std::vector<Mat> sigma_inv_path;
  /// First node whose sigma has condition number above kSigmaConditionLimit, or -1.
  int singular_node = -1;
};

inline constexpr double kSigmaConditionLimit = 1e12;

ForwardBundle simulate_forward(const ProblemSpec& spec, const NoisePath& noise);
ForwardBundle simulate_forward(const ProblemSpec& spec, const CoefficientSet& coeffs, const NoisePath& noise);

struct TangentReport {
  double max_product_deviation = 0.0;  // max_k |grad_k * grad_inv_k - I| (max norm)
  double min_sigma_singular_value = 0.0;
};

TangentReport tangent_consistency_check(const ForwardBundle& bundle);

/// Throws SimulationError naming the node when sigma is not invertible along the path.
void require_invertible_sigma(const ForwardBundle& bundle);

/// Inner ensemble for one frozen B-path, stored node-major in flat arrays.
class PathEnsemble {
 public:
  PathEnsemble() = default;
  PathEnsemble(int n_paths, int n_steps, int dim, bool with_tangent);

  int n_paths() const { return n_paths_; }
  int n_steps() const { return n_steps_; }
  int dim() const { return dim_; }
  bool has_tangent() const { return !grad_.empty(); }

  double* x(int k, int p) { return &x_[idx(k, p) * dim_]; }
  const double* x(int k, int p) const { return &x_[idx(k, p) * dim_]; }
  double* dw(int k, int p) { return &dw_[idx(k, p) * dim_]; }
  const double* dw(int k, int p) const { return &dw_[idx(k, p) * dim_]; }
  /// Column-major d x d blocks.
  double* grad(int k, int p) { return &grad_[idx(k, p) * dim_ * dim_]; }
  const double* grad(int k, int p) const { return &grad_[idx(k, p) * dim_ * dim_]; }
  double* grad_inv(int k, int p) { return &grad_inv_[idx(k, p) * dim_ * dim_]; }
  const double* grad_inv(int k, int p) const { return &grad_inv_[idx(k, p) * dim_ * dim_]; }

  Vec x_vec(int k, int p) const;
  Vec dw_vec(int k, int p) const;
  Mat grad_mat(int k, int p) const;
  Mat grad_inv_mat(int k, int p) const;

  /// Shared B increments of the frozen outer path.
  std::vector<Vec> db;
  int outer_id = 0;

 private:
  std::size_t idx(int k, int p) const {
    return static_cast<std::size_t>(k) * static_cast<std::size_t>(n_paths_) + static_cast<std::size_t>(p);
  }
  int n_paths_ = 0;
  int n_steps_ = 0;
  int dim_ = 1;
  std::vector<double> x_;
  std::vector<double> dw_;
  std::vector<double> grad_;
  std::vector<double> grad_inv_;
};

/// Simulates all inner paths of outer path `outer_id`. The per-path values are
/// identical to simulate_forward on sample_noise(spec, outer_id, p).
PathEnsemble simulate_ensemble(const ProblemSpec& spec, const CoefficientSet& coeffs, int outer_id, bool with_tangent);

/// Columnar dump: header `time,x1..xd,g11..gdd` (g row-major), one line per node, paper-clock time.
void write_path_dump(std::ostream& os, const ProblemSpec& spec, const ForwardBundle& bundle);

/// Inverse of a small matrix; returns false when the condition number exceeds `limit`.
bool small_inverse(const Mat& m, Mat& inv, double limit = kSigmaConditionLimit);

}  // namespace bdsde
