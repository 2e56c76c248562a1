#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace bdsde {

/// Uniform partition of [0, horizon] into n_steps intervals.
///
/// The simulation runs on the reversed clock tau = horizon - s: node k of the
/// grid is tau_k = k * delta, which is the paper-clock time s = horizon - tau_k.
/// Node 0 is therefore the starting point of the forward diffusion and node
/// n_steps is where the terminal condition of the backward equation lives.
class TimeGrid {
 public:
  TimeGrid() = default;
  TimeGrid(double horizon, int n_steps);

  double horizon() const { return horizon_; }
  int n_steps() const { return n_steps_; }
  double delta() const { return delta_; }
  const std::vector<double>& nodes() const { return nodes_; }
  double node(int k) const { return nodes_[static_cast<std::size_t>(k)]; }

  /// Paper-clock time of simulation node k.
  double paper_time(int k) const { return horizon_ - nodes_[static_cast<std::size_t>(k)]; }
  /// Simulation node that sits at paper-clock node index j (time j * delta).
  int sim_index(int paper_index) const { return n_steps_ - paper_index; }

  /// Grid node index of a time, or -1 if the time is not a node (relative tolerance 1e-9).
  int index_of(double time) const;

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  double horizon_ = 0.0;
  int n_steps_ = 0;
  double delta_ = 0.0;
  std::vector<double> nodes_;
};

TimeGrid make_grid(double horizon, int n_steps);

/// Partition 0 = t_0 < ... < t_n = horizon of the paper clock, aligned with grid nodes.
/// Indices are paper-clock node indices (time = index * delta).
class Partition {
 public:
  Partition() = default;
  Partition(const TimeGrid& grid, std::vector<int> indices);

  /// Builds a partition from times; every time must coincide with a grid node.
  static Partition from_times(const TimeGrid& grid, std::span<const double> times);
  static Partition trivial(const TimeGrid& grid);

  const std::vector<int>& indices() const { return indices_; }
  const std::vector<double>& node_times() const { return times_; }
  /// Number of intervals n; there are n + 1 nodes.
  int n_intervals() const { return static_cast<int>(indices_.size()) - 1; }

  /// Interval i in 1..n such that t_{i-1} < time index < t_i, or 0 if the index is a node.
  int interval_containing(int paper_index) const;
  bool is_node(int paper_index) const;

  friend bool operator==(const Partition&, const Partition&) = default;

 private:
  std::vector<int> indices_;
  std::vector<double> times_;
};

}  // namespace bdsde
