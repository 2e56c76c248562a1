#include "bdsde/grid.hpp"

#include "bdsde/types.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace bdsde {

TimeGrid::TimeGrid(double horizon, int n_steps) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw ValidationError("time grid: horizon must be positive, got " + std::to_string(horizon));
  }
  if (n_steps < 1) {
    throw ValidationError("time grid: n_steps must be >= 1, got " + std::to_string(n_steps));
  }
  horizon_ = horizon;
  n_steps_ = n_steps;
  delta_ = horizon / n_steps;
  nodes_.resize(static_cast<std::size_t>(n_steps) + 1);
  for (int k = 0; k <= n_steps; ++k) {
    nodes_[static_cast<std::size_t>(k)] = horizon * static_cast<double>(k) / n_steps;
  }
  nodes_.back() = horizon;
}

int TimeGrid::index_of(double time) const {
  const double pos = time / delta_;
  const double rounded = std::round(pos);
  if (std::abs(pos - rounded) > 1e-9 * std::max(1.0, std::abs(pos))) return -1;
  if (rounded < 0 || rounded > n_steps_) return -1;
  return static_cast<int>(rounded);
}

TimeGrid make_grid(double horizon, int n_steps) { return TimeGrid(horizon, n_steps); }

Partition::Partition(const TimeGrid& grid, std::vector<int> indices) : indices_(std::move(indices)) {
  if (indices_.size() < 2) throw ValidationError("partition: needs at least the nodes 0 and n_steps");
  if (indices_.front() != 0 || indices_.back() != grid.n_steps()) {
    throw ValidationError("partition: first node must be 0 and last node must be the horizon");
  }
  for (std::size_t i = 1; i < indices_.size(); ++i) {
    if (indices_[i] <= indices_[i - 1]) throw ValidationError("partition: indices must be strictly increasing");
  }
  times_.reserve(indices_.size());
  for (int idx : indices_) times_.push_back(idx * grid.delta());
  times_.back() = grid.horizon();
}

Partition Partition::from_times(const TimeGrid& grid, std::span<const double> times) {
  std::vector<int> idx;
  idx.reserve(times.size());
  for (double t : times) {
    const int k = grid.index_of(t);
    if (k < 0) throw ValidationError("partition: time " + std::to_string(t) + " is not a grid node");
    idx.push_back(k);
  }
  return Partition(grid, std::move(idx));
}

Partition Partition::trivial(const TimeGrid& grid) { return Partition(grid, {0, grid.n_steps()}); }

int Partition::interval_containing(int paper_index) const {
  for (std::size_t i = 1; i < indices_.size(); ++i) {
    if (paper_index == indices_[i - 1] || paper_index == indices_[i]) return 0;
    if (paper_index > indices_[i - 1] && paper_index < indices_[i]) return static_cast<int>(i);
  }
  return 0;
}

bool Partition::is_node(int paper_index) const {
  return std::find(indices_.begin(), indices_.end(), paper_index) != indices_.end();
}

}  // namespace bdsde
