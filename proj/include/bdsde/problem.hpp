#pragma once

#include "bdsde/coefficients.hpp"
#include "bdsde/grid.hpp"
#include "bdsde/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace bdsde {

/// How W and B increments are drawn.
///  - kGaussian: N(0, delta) per component.
///  - kRademacher: +-sqrt(delta) coin flips.
///  - kEnumerate: W signs read from the bits of the inner path id, so the
///    2^(n_steps * d) inner paths cover every outcome exactly once; B as in
///    kRademacher.
enum class NoiseMode { kGaussian, kRademacher, kEnumerate };

std::string to_string(NoiseMode mode);
NoiseMode noise_mode_from_string(const std::string& name);

struct ProblemSpec {
  CoefficientSet coefficients;
  double t = 1.0;
  Vec x = Vec::Zero(1);
  TimeGrid grid;
  std::optional<Partition> partition;
  int n_inner_paths = 1000;
  int n_outer_paths = 1;
  std::uint64_t seed = 0;
  int regression_degree = 3;
  std::optional<double> mollify_eps;

  NoiseMode noise_mode = NoiseMode::kGaussian;
  /// When positive (a multiple of n_steps), increments are block sums of a
  /// finer master grid, so runs at different n_steps see the same Brownian paths.
  int noise_master_steps = 0;
  /// Fixed-point sweeps that re-evaluate f at the current node; 0 keeps the explicit scheme.
  int picard_iterations = 0;
  /// W draws of inner path p use id inner_offset + p; disjoint ranges give independent
  /// replicate ensembles under the same frozen B-path.
  int inner_offset = 0;
  bool allow_fd_tangent = true;
  int threads = 1;

  int dim() const { return coefficients.dim; }
  double delta() const { return grid.delta(); }
  int n_steps() const { return grid.n_steps(); }

  /// Throws ValidationError or ConfigurationError when the invariants fail.
  void validate() const;
};

/// Coefficients actually used by the pipelines: mollified when mollify_eps is set.
CoefficientSet effective_coefficients(const ProblemSpec& spec);

/// Paper-clock partition node indices mapped to simulation-clock indices,
/// in partition order t_0, ..., t_n (so the first entry is n_steps).
std::vector<int> terminal_nodes(const ProblemSpec& spec);

struct NoisePath {
  std::vector<Vec> w_increments;  // n_steps entries, reversed clock
  std::vector<Vec> b_increments;

  std::vector<Vec> w_path() const;  // n_steps + 1 cumulative values from 0
  std::vector<Vec> b_path() const;
};

NoisePath sample_noise(const ProblemSpec& spec, int outer_id, int inner_id);

/// Increment of component c over simulation step k. These are the building
/// blocks of sample_noise and are exposed for ensemble code that fills flat arrays.
double w_increment(const ProblemSpec& spec, int outer_id, int inner_id, int step, int component);
std::vector<Vec> sample_b_increments(const ProblemSpec& spec, int outer_id);

}  // namespace bdsde
