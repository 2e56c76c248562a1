#include "bdsde/problem.hpp"

#include "bdsde/rng.hpp"

#include <cmath>
#include <numeric>

namespace bdsde {

std::string to_string(NoiseMode mode) {
  switch (mode) {
    case NoiseMode::kGaussian: return "gaussian";
    case NoiseMode::kRademacher: return "rademacher";
    case NoiseMode::kEnumerate: return "enumerate";
  }
  return "gaussian";
}

NoiseMode noise_mode_from_string(const std::string& name) {
  if (name == "gaussian") return NoiseMode::kGaussian;
  if (name == "rademacher") return NoiseMode::kRademacher;
  if (name == "enumerate") return NoiseMode::kEnumerate;
  throw ConfigurationError("unknown noise_mode '" + name + "' (gaussian, rademacher, enumerate)");
}

void ProblemSpec::validate() const {
  const int d = coefficients.dim;
  if (d < 1 || d > kMaxDim) throw ValidationError("dimension out of range");
  if (x.size() != d) throw ValidationError("start point has wrong dimension");
  if (grid.n_steps() < 1) throw ValidationError("time grid not initialised");
  if (std::abs(grid.horizon() - t) > 1e-12 * std::max(1.0, t)) {
    throw ValidationError("grid horizon must equal the start time t");
  }
  if (n_inner_paths < 2) throw ValidationError("n_inner_paths must be >= 2");
  if (n_outer_paths < 1) throw ValidationError("n_outer_paths must be >= 1");
  if (regression_degree < 0) throw ValidationError("regression_degree must be >= 0");
  if (mollify_eps && *mollify_eps < 0.0) throw ValidationError("mollify_eps must be >= 0");
  if (picard_iterations < 0) throw ValidationError("picard_iterations must be >= 0");
  if (threads < 1) throw ValidationError("threads must be >= 1");
  if (inner_offset < 0) throw ValidationError("inner_offset must be >= 0");
  if (!coefficients.drift || !coefficients.diffusion || !coefficients.driver || !coefficients.noise ||
      !coefficients.terminal) {
    throw ConfigurationError("coefficient set is incomplete");
  }
  if (coefficients.discrete_terminal()) {
    if (!partition) throw ConfigurationError("a multi-point terminal needs a partition");
    if (partition->n_intervals() + 1 != coefficients.terminal_points) {
      throw ConfigurationError("terminal_points must equal the number of partition nodes");
    }
  }
  if (partition && partition->indices().back() != grid.n_steps()) {
    throw ValidationError("partition does not match the time grid");
  }
  if (noise_master_steps < 0 || (noise_master_steps > 0 && noise_master_steps % grid.n_steps() != 0)) {
    throw ValidationError("noise_master_steps must be a positive multiple of n_steps");
  }
  if (noise_mode == NoiseMode::kEnumerate) {
    const int bits = grid.n_steps() * d;
    if (bits > 24) throw ValidationError("enumerate mode supports at most 24 sign bits");
    if (n_inner_paths != (1 << bits)) {
      throw ValidationError("enumerate mode needs n_inner_paths = 2^(n_steps * d) = " + std::to_string(1 << bits));
    }
    if (noise_master_steps > 0) throw ValidationError("enumerate mode cannot use noise_master_steps");
    if (inner_offset != 0) throw ValidationError("enumerate mode cannot use inner_offset");
  }
}

CoefficientSet effective_coefficients(const ProblemSpec& spec) {
  if (spec.mollify_eps && *spec.mollify_eps > 0.0) return mollify(spec.coefficients, *spec.mollify_eps);
  return spec.coefficients;
}

std::vector<int> terminal_nodes(const ProblemSpec& spec) {
  const int n = spec.grid.n_steps();
  if (!spec.coefficients.discrete_terminal()) return {n};
  std::vector<int> out;
  for (int idx : spec.partition->indices()) out.push_back(n - idx);
  return out;
}

namespace {

double rademacher(std::uint64_t seed, Stream stream, int step, std::uint32_t inner, int outer, int component) {
  const auto w = raw_words(seed, stream, static_cast<std::uint32_t>(step), inner, static_cast<std::uint32_t>(outer),
                           static_cast<std::uint32_t>(component / 4));
  return (w[component % 4] >> 31) ? 1.0 : -1.0;
}

double normal(std::uint64_t seed, Stream stream, int step, std::uint32_t inner, int outer, int component) {
  return normal_pair(seed, stream, static_cast<std::uint32_t>(step), inner, static_cast<std::uint32_t>(outer),
                     static_cast<std::uint32_t>(component / 2))[component % 2];
}

/// Unit-variance draw on the master grid (or the plain grid when no master is set).
double base_draw(const ProblemSpec& spec, Stream stream, int step, std::uint32_t inner, int outer, int component) {
  if (spec.noise_mode == NoiseMode::kGaussian) return normal(spec.seed, stream, step, inner, outer, component);
  return rademacher(spec.seed, stream, step, inner, outer, component);
}

double increment(const ProblemSpec& spec, Stream stream, std::uint32_t inner, int outer, int step, int component) {
  const int n = spec.grid.n_steps();
  if (spec.noise_master_steps > 0) {
    const int r = spec.noise_master_steps / n;
    const double scale = std::sqrt(spec.grid.horizon() / spec.noise_master_steps);
    double sum = 0.0;
    for (int m = step * r; m < (step + 1) * r; ++m) sum += base_draw(spec, stream, m, inner, outer, component);
    return sum * scale;
  }
  return base_draw(spec, stream, step, inner, outer, component) * std::sqrt(spec.grid.delta());
}

void check_ids(const ProblemSpec& spec, int outer_id, int inner_id) {
  if (outer_id < 0) throw ValidationError("outer_id must be non-negative");
  if (inner_id < 0 || inner_id >= spec.n_inner_paths) {
    throw ValidationError("inner_id " + std::to_string(inner_id) + " outside 0.." +
                          std::to_string(spec.n_inner_paths - 1));
  }
}

}  // namespace

double w_increment(const ProblemSpec& spec, int outer_id, int inner_id, int step, int component) {
  if (spec.noise_mode == NoiseMode::kEnumerate) {
    const int bit = step * spec.dim() + component;
    return ((static_cast<std::uint32_t>(inner_id) >> bit) & 1u) ? std::sqrt(spec.grid.delta())
                                                                 : -std::sqrt(spec.grid.delta());
  }
  return increment(spec, Stream::kW, static_cast<std::uint32_t>(spec.inner_offset + inner_id), outer_id, step,
                   component);
}

std::vector<Vec> sample_b_increments(const ProblemSpec& spec, int outer_id) {
  if (outer_id < 0) throw ValidationError("outer_id must be non-negative");
  const int d = spec.dim();
  std::vector<Vec> out(static_cast<std::size_t>(spec.grid.n_steps()), Vec::Zero(d));
  for (int k = 0; k < spec.grid.n_steps(); ++k)
    for (int c = 0; c < d; ++c) out[k](c) = increment(spec, Stream::kB, 0u, outer_id, k, c);
  return out;
}

NoisePath sample_noise(const ProblemSpec& spec, int outer_id, int inner_id) {
  check_ids(spec, outer_id, inner_id);
  const int d = spec.dim();
  NoisePath p;
  p.b_increments = sample_b_increments(spec, outer_id);
  p.w_increments.assign(static_cast<std::size_t>(spec.grid.n_steps()), Vec::Zero(d));
  for (int k = 0; k < spec.grid.n_steps(); ++k)
    for (int c = 0; c < d; ++c) p.w_increments[k](c) = w_increment(spec, outer_id, inner_id, k, c);
  return p;
}

namespace {
std::vector<Vec> cumulative(const std::vector<Vec>& inc) {
  const int d = inc.empty() ? 1 : static_cast<int>(inc.front().size());
  std::vector<Vec> out;
  out.reserve(inc.size() + 1);
  out.push_back(Vec::Zero(d));
  for (const Vec& v : inc) out.push_back(out.back() + v);
  return out;
}
}  // namespace

std::vector<Vec> NoisePath::w_path() const { return cumulative(w_increments); }
std::vector<Vec> NoisePath::b_path() const { return cumulative(b_increments); }

}  // namespace bdsde
