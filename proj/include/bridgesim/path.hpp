#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "bridgesim/grid.hpp"
#include "bridgesim/model.hpp"

namespace bridgesim {

/// One discretized trajectory. Column j of `states` is the state at
/// grid->nodes[j].
struct PathSample {
  std::shared_ptr<const TimeGrid> grid;
  Matrix states;
  std::uint64_t seed = 0;
  std::uint64_t path_id = 0;
  /// Bridge paths only: state reached at T_k by the last Euler step, before
  /// the terminal clamp. Indexed by observation.
  std::vector<Vector> pre_clamp;
  /// Optional Brownian increments sigma-free dW_j, one column per step.
  Matrix increments;

  std::size_t size() const { return static_cast<std::size_t>(states.cols()); }
  Vector state(std::size_t j) const { return states.col(static_cast<Eigen::Index>(j)); }
  Vector at_time(double t) const { return state(grid->index_of(t)); }
};

}  // namespace bridgesim
