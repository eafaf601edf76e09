#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "bridgesim/error.hpp"
#include "bridgesim/observation.hpp"

namespace bridgesim {

/// Integration nodes on [0, horizon]. Every observation time and every
/// window start is a node; `obs_index[k]` and `window_start_index[k]` locate
/// them.
struct TimeGrid {
  std::vector<double> nodes;
  std::vector<std::size_t> obs_index;
  std::vector<std::size_t> window_start_index;

  std::size_t steps() const { return nodes.size() - 1; }
  double dt(std::size_t j) const { return nodes[j + 1] - nodes[j]; }
  double horizon() const { return nodes.back(); }

  /// Grid index of a node equal to `t` (within 1e-12 relative), or throws.
  std::size_t index_of(double t) const {
    const auto it = std::lower_bound(nodes.begin(), nodes.end(), t - tolerance());
    if (it == nodes.end() || std::abs(*it - t) > tolerance()) {
      throw Error(ErrorKind::InvalidConfiguration,
                  "time " + std::to_string(t) + " is not a grid node");
    }
    return static_cast<std::size_t>(it - nodes.begin());
  }

  double tolerance() const { return 1e-12 * std::max(1.0, horizon()); }
};

struct GridOptions {
  double dt_base = 0.01;
  /// Smallest step near an observation; <= 0 selects 1e-5 * horizon.
  double dt_min = 0.0;
  double refine_ratio = 0.5;
};

/// Uniform steps of dt_base outside guidance windows; inside (T_k - eps_k, T_k)
/// each step is min(dt_base, max(r (T_k - t), dt_min)) so steps shrink
/// geometrically toward T_k. `extra_nodes` (e.g. query times or the cut
/// points T_k - eps of an approximating bridge) are inserted as nodes.
inline TimeGrid build_grid(double horizon, const ObservationSet& obs, const GridOptions& opt,
                           std::span<const double> extra_nodes = {}) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw Error(ErrorKind::InvalidConfiguration, "horizon must be positive and finite");
  }
  if (horizon < obs.last_time()) {
    throw Error(ErrorKind::InvalidConfiguration,
                "horizon is smaller than the last observation time");
  }
  const double dt_min = opt.dt_min > 0.0 ? opt.dt_min : 1e-5 * horizon;
  if (!(opt.dt_base > 0.0) || dt_min > opt.dt_base) {
    throw Error(ErrorKind::InvalidConfiguration, "require 0 < dt_min <= dt_base");
  }
  if (!(opt.refine_ratio > 0.0 && opt.refine_ratio < 1.0)) {
    throw Error(ErrorKind::InvalidConfiguration, "refine_ratio must lie in (0, 1)");
  }
  if (!obs.empty() && dt_min >= obs.min_window()) {
    throw Error(ErrorKind::InvalidConfiguration,
                "dt_min must be smaller than every observation window");
  }

  const double tol = 1e-12 * std::max(1.0, horizon);
  std::vector<double> keys{0.0, horizon};
  for (std::size_t k = 0; k < obs.size(); ++k) {
    keys.push_back(obs[k].time);
    keys.push_back(obs.window_start(k));
  }
  for (double t : extra_nodes) {
    if (!(t >= 0.0 && t <= horizon)) {
      throw Error(ErrorKind::InvalidConfiguration,
                  "requested node " + std::to_string(t) + " outside [0, horizon]");
    }
    keys.push_back(t);
  }
  std::sort(keys.begin(), keys.end());
  std::vector<double> unique_keys;
  for (double t : keys) {
    if (unique_keys.empty() || t - unique_keys.back() > tol) unique_keys.push_back(t);
  }
  // observation times win over nearby window starts that round differently
  for (double& t : unique_keys) {
    for (std::size_t k = 0; k < obs.size(); ++k) {
      if (std::abs(t - obs[k].time) <= tol) t = obs[k].time;
    }
  }

  // Observation whose window contains [a, b], if any. Windows are disjoint.
  auto window_of = [&](double a, double b) -> std::ptrdiff_t {
    for (std::size_t k = 0; k < obs.size(); ++k) {
      if (a >= obs.window_start(k) - tol && b <= obs[k].time + tol) {
        return static_cast<std::ptrdiff_t>(k);
      }
    }
    return -1;
  };

  TimeGrid grid;
  grid.nodes.push_back(0.0);
  for (std::size_t s = 0; s + 1 < unique_keys.size(); ++s) {
    const double a = unique_keys[s];
    const double b = unique_keys[s + 1];
    const std::ptrdiff_t k = window_of(a, b);
    if (k < 0) {
      for (std::size_t i = 1;; ++i) {
        const double t = a + static_cast<double>(i) * opt.dt_base;
        if (t >= b - tol) break;
        grid.nodes.push_back(t);
      }
    } else {
      const double target = obs[static_cast<std::size_t>(k)].time;
      double t = a;
      while (true) {
        double h = std::min(opt.dt_base, std::max(opt.refine_ratio * (target - t), dt_min));
        if (t + h >= b - tol) break;
        // no sliver steps right before the observation
        if (std::abs(b - target) <= tol && target - (t + h) < 0.5 * dt_min) {
          h = target - t - 0.5 * dt_min;
        }
        t += h;
        grid.nodes.push_back(t);
      }
    }
    grid.nodes.push_back(b);
  }

  for (std::size_t k = 0; k < obs.size(); ++k) {
    grid.obs_index.push_back(grid.index_of(obs[k].time));
    grid.window_start_index.push_back(grid.index_of(obs.window_start(k)));
  }
  return grid;
}

}  // namespace bridgesim
