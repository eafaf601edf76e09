#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>

#include "bridgesim/error.hpp"
#include "bridgesim/grid.hpp"
#include "bridgesim/model.hpp"
#include "bridgesim/noise.hpp"
#include "bridgesim/path.hpp"

namespace bridgesim {

namespace detail {

inline void check_state(const Vector& z, std::size_t step, double blowup_limit) {
  if (!z.allFinite()) {
    throw Error(ErrorKind::NumericalBlowup,
                "non-finite state at step " + std::to_string(step), step);
  }
  if (z.norm() > blowup_limit) {
    throw Error(ErrorKind::NumericalBlowup,
                "state norm exceeded blowup limit at step " + std::to_string(step), step);
  }
}

inline double blowup_limit(const Vector& u) { return 1e8 * (1.0 + u.norm()); }

}  // namespace detail

/// Euler-Maruyama for dx = b dt + sigma dW with left-point coefficients:
/// x_{j+1} = x_j + b(t_j, x_j) dt_j + sigma(t_j, x_j) sqrt(dt_j) xi_j.
/// With `validate` set, ellipticity is checked at every node.
inline PathSample simulate_unconditioned(const ModelSpec& model,
                                         std::shared_ptr<const TimeGrid> grid,
                                         const Vector& u, std::uint64_t seed,
                                         std::uint64_t path_id, bool validate = false) {
  if (u.size() != model.dim || !u.allFinite()) {
    throw Error(ErrorKind::InvalidConfiguration, "initial state must be finite with model dimension");
  }
  if (validate) validate_model(model, grid->nodes.front(), u);

  const NoiseStream noise(seed, path_id);
  PathSample path;
  path.grid = grid;
  path.seed = seed;
  path.path_id = path_id;
  path.states.resize(model.dim, static_cast<Eigen::Index>(grid->nodes.size()));
  path.states.col(0) = u;

  Vector z = u;
  for (std::size_t j = 0; j < grid->steps(); ++j) {
    const double t = grid->nodes[j];
    const double h = grid->dt(j);
    if (validate) check_ellipticity(model, t, z);
    const Vector xi = noise.step_normals(j, model.dim);
    z += model.drift(t, z) * h + model.diffusion(t, z) * (std::sqrt(h) * xi);
    if (!z.allFinite()) {
      throw Error(ErrorKind::NumericalBlowup,
                  "non-finite state at step " + std::to_string(j), j);
    }
    path.states.col(static_cast<Eigen::Index>(j + 1)) = z;
  }
  return path;
}

}  // namespace bridgesim
