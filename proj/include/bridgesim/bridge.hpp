#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bridgesim/error.hpp"
#include "bridgesim/grid.hpp"
#include "bridgesim/model.hpp"
#include "bridgesim/noise.hpp"
#include "bridgesim/observation.hpp"
#include "bridgesim/path.hpp"
#include "bridgesim/simulate.hpp"

namespace bridgesim {

struct BridgeConfig {
  /// Clamp at T_k only when ||L_k y - v_k|| exceeds this; 0 always clamps.
  double clamp_tolerance = 0.0;
  /// Switch guidance off at distance eps before each T_k (approximating
  /// bridge, no clamping). Requires 0 < eps <= min_k eps_k.
  std::optional<double> epsilon_cutoff;
  bool record_increments = false;
  bool validate = false;
};

/// Oblique-projection update z + a L^T A (v - L z) evaluated at (T_k, z);
/// the result satisfies L z' = v.
inline Vector clamp_at_observation(const ModelSpec& model, const ObservationSet& obs,
                                   std::size_t k, const Vector& z) {
  const Observation& o = obs[k];
  const Matrix a = model.diffusion_matrix(o.time, z);
  const auto llt = detail::factor_observed_covariance(o.matrix, a);
  const Vector residual = o.value - o.matrix * z;
  return z + a * o.matrix.transpose() * llt.solve(residual);
}

namespace detail {

/// Grid index at which guidance toward observation k stops (exclusive).
inline std::vector<std::size_t> guidance_stop_indices(const ObservationSet& obs,
                                                      const TimeGrid& grid,
                                                      std::optional<double> cutoff) {
  std::vector<std::size_t> stop(obs.size());
  for (std::size_t k = 0; k < obs.size(); ++k) {
    stop[k] = cutoff ? grid.index_of(obs[k].time - *cutoff) : grid.obs_index[k];
  }
  return stop;
}

}  // namespace detail

/// Euler-Maruyama for the guided bridge
///   dy = b dt + sigma dW - sum_k 1_k(t) a L_k^T A_k (L_k y - v_k)/(T_k - t) dt
/// where step j is guided toward k when T_k - eps_k <= t_j < T_k (or
/// < T_k - eps for the approximating bridge). Noise for step j is shared
/// with every other simulator using the same (seed, path_id) and grid.
/// A model with a drift split is simulated under its bounded part.
inline PathSample simulate_bridge(const ModelSpec& model, const ObservationSet& obs,
                                  std::shared_ptr<const TimeGrid> grid, const Vector& u,
                                  std::uint64_t seed, std::uint64_t path_id,
                                  const BridgeConfig& cfg = {}) {
  if (u.size() != model.dim || !u.allFinite()) {
    throw Error(ErrorKind::InvalidConfiguration,
                "initial state must be finite with model dimension");
  }
  if (grid->obs_index.size() != obs.size()) {
    throw Error(ErrorKind::InvalidConfiguration, "grid was not built for these observations");
  }
  if (cfg.epsilon_cutoff) {
    const double eps = *cfg.epsilon_cutoff;
    if (!(eps > 0.0) || eps > obs.min_window()) {
      throw Error(ErrorKind::InvalidConfiguration,
                  "epsilon cutoff must satisfy 0 < eps <= min_k eps_k");
    }
  }
  if (cfg.validate) validate_model(model, grid->nodes.front(), u);

  const auto stop = detail::guidance_stop_indices(obs, *grid, cfg.epsilon_cutoff);
  const bool clamp = !cfg.epsilon_cutoff;
  const DriftFn& base_drift = model.drift_split ? model.drift_split->bounded : model.drift;
  const NoiseStream noise(seed, path_id);
  const double limit = detail::blowup_limit(u);

  PathSample path;
  path.grid = grid;
  path.seed = seed;
  path.path_id = path_id;
  path.states.resize(model.dim, static_cast<Eigen::Index>(grid->nodes.size()));
  path.states.col(0) = u;
  if (clamp) path.pre_clamp.resize(obs.size());
  if (cfg.record_increments) {
    path.increments.resize(model.dim, static_cast<Eigen::Index>(grid->steps()));
  }

  Vector z = u;
  for (std::size_t j = 0; j < grid->steps(); ++j) {
    const double t = grid->nodes[j];
    const double h = grid->dt(j);
    if (cfg.validate) check_ellipticity(model, t, z);

    Vector drift = base_drift(t, z);
    for (std::size_t k = 0; k < obs.size(); ++k) {
      if (j >= grid->window_start_index[k] && j < stop[k]) {
        drift -= guiding_term(model, obs, t, z, k);
      }
    }
    const Vector dw = std::sqrt(h) * noise.step_normals(j, model.dim);
    if (cfg.record_increments) path.increments.col(static_cast<Eigen::Index>(j)) = dw;
    z += drift * h + model.diffusion(t, z) * dw;
    detail::check_state(z, j, limit);

    if (clamp) {
      for (std::size_t k = 0; k < obs.size(); ++k) {
        if (j + 1 != grid->obs_index[k]) continue;
        path.pre_clamp[k] = z;
        const double miss = (obs[k].matrix * z - obs[k].value).norm();
        if (cfg.clamp_tolerance == 0.0 || miss > cfg.clamp_tolerance) {
          z = clamp_at_observation(model, obs, k, z);
          detail::check_state(z, j, limit);
        }
      }
    }
    path.states.col(static_cast<Eigen::Index>(j + 1)) = z;
  }
  return path;
}

/// Approximating bridge y^eps: guidance stops at T_k - eps and no clamp is
/// applied. The grid must contain every T_k - eps.
inline PathSample simulate_bridge_eps(const ModelSpec& model, const ObservationSet& obs,
                                      std::shared_ptr<const TimeGrid> grid, const Vector& u,
                                      std::uint64_t seed, std::uint64_t path_id, double eps,
                                      BridgeConfig cfg = {}) {
  cfg.epsilon_cutoff = eps;
  return simulate_bridge(model, obs, std::move(grid), u, seed, path_id, cfg);
}

}  // namespace bridgesim
