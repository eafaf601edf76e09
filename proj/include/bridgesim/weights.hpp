#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bridgesim/error.hpp"
#include "bridgesim/model.hpp"
#include "bridgesim/observation.hpp"
#include "bridgesim/path.hpp"

namespace bridgesim {

/// Terms of the log importance weight contributed by one observation.
struct ObservationTerms {
  double log_eta = 0.0;
  double boundary = 0.0;
  double drift = 0.0;
  double dA = 0.0;
  double covar = 0.0;

  double sum() const { return log_eta + boundary + drift + dA + covar; }
};

/// Log weight of a bridge path, up to an additive constant shared by every
/// path (the normalizing constant and the eps_k^{-m_k/2} factors).
struct LogWeightBreakdown {
  std::vector<ObservationTerms> per_observation;
  double girsanov = 0.0;
  double total = 0.0;
};

namespace detail {

inline void require_finite(double value, const char* term, std::size_t k, std::size_t step) {
  if (!std::isfinite(value)) {
    throw Error(ErrorKind::WeightOverflow,
                std::string("non-finite ") + term + " term for observation " +
                    std::to_string(k) + " at step " + std::to_string(step),
                step);
  }
}

}  // namespace detail

/// Girsanov factor for the unbounded part c = b - b_bounded of the drift:
///   sum_j c_j^T a_j^{-1} (y_{j+1} - y_j) - 0.5 sum_j ||sigma_j^{-1} c_j||^2 dt_j
/// over the whole grid, coefficients at the left node. At observation nodes
/// the pre-clamp state closes the step.
inline double girsanov_correction(const PathSample& path, const ModelSpec& model) {
  if (!model.drift_split) {
    throw Error(ErrorKind::InvalidConfiguration,
                "girsanov correction requires a drift split");
  }
  const TimeGrid& grid = *path.grid;
  std::vector<const Vector*> step_end(grid.steps() + 1, nullptr);
  for (std::size_t k = 0; k < path.pre_clamp.size(); ++k) {
    step_end[grid.obs_index[k]] = &path.pre_clamp[k];
  }

  double total = 0.0;
  for (std::size_t j = 0; j < grid.steps(); ++j) {
    const double t = grid.nodes[j];
    const Vector z = path.state(j);
    const Vector next = step_end[j + 1] ? *step_end[j + 1] : path.state(j + 1);
    const Vector c = model.drift_split->unbounded(t, z);
    const Matrix sigma = model.diffusion(t, z);
    const Matrix a = sigma * sigma.transpose();
    const Vector a_inv_c = a.llt().solve(c);
    const Vector sigma_inv_c = sigma.partialPivLu().solve(c);
    total += a_inv_c.dot(next - z) - 0.5 * sigma_inv_c.squaredNorm() * grid.dt(j);
    if (!std::isfinite(total)) {
      throw Error(ErrorKind::WeightOverflow,
                  "non-finite girsanov term at step " + std::to_string(j), j);
    }
  }
  return total;
}

/// Left-point discretization of the log weight of a bridge path. For each
/// observation k, with e_j = L_k y_j - v_k and d_j = T_k - t_j on the steps
/// T_k - eps_k <= t_j < T_k:
///   log_eta  = 0.5 log det A_k(T_k, y_{T_k})
///   boundary = -||beta_k e||^2 / (2 eps_k) at T_k - eps_k
///   drift    = -sum e_j^T A_j L_k b_j dt_j / d_j
///   dA       = -sum e_j^T (A_{j+1} - A_j) e_j / (2 d_j)
///   covar    = -sum_{il} (A_{j+1} - A_j)_{il} (e e^T_{j+1} - e e^T_j)_{il} / (2 d_j)
/// The step ending at T_k uses the pre-clamp state. With a drift split the
/// drift term uses the bounded part and the girsanov term is added.
inline LogWeightBreakdown log_weight(const PathSample& path, const ModelSpec& model,
                                     const ObservationSet& obs) {
  const TimeGrid& grid = *path.grid;
  const DriftFn& drift = model.drift_split ? model.drift_split->bounded : model.drift;
  LogWeightBreakdown out;
  out.per_observation.resize(obs.size());

  for (std::size_t k = 0; k < obs.size(); ++k) {
    const Observation& o = obs[k];
    const Matrix& L = o.matrix;
    const std::size_t first = grid.window_start_index[k];
    const std::size_t last = grid.obs_index[k];
    const double eps = obs.window(k);
    ObservationTerms& terms = out.per_observation[k];

    auto node_state = [&](std::size_t j) -> Vector {
      if (j == last && k < path.pre_clamp.size()) return path.pre_clamp[k];
      return path.state(j);
    };

    Vector z = node_state(first);
    ProjectionBundle pb = bundle(model, obs, grid.nodes[first], z, k);
    Vector e = L * z - o.value;
    terms.boundary = -(pb.beta * e).squaredNorm() / (2.0 * eps);
    detail::require_finite(terms.boundary, "boundary", k, first);

    for (std::size_t j = first; j < last; ++j) {
      const double t = grid.nodes[j];
      const double d = o.time - t;
      const double h = grid.dt(j);
      const Vector z_next = node_state(j + 1);
      const double t_next = (j + 1 == last) ? o.time : grid.nodes[j + 1];
      const ProjectionBundle pb_next = bundle(model, obs, t_next, z_next, k);
      const Vector e_next = L * z_next - o.value;

      terms.drift -= e.dot(pb.A * (L * drift(t, z))) * h / d;
      const Matrix dA = pb_next.A - pb.A;
      terms.dA -= e.dot(dA * e) / (2.0 * d);
      const Matrix d_outer = e_next * e_next.transpose() - e * e.transpose();
      terms.covar -= dA.cwiseProduct(d_outer).sum() / (2.0 * d);

      detail::require_finite(terms.drift, "drift", k, j);
      detail::require_finite(terms.dA, "dA", k, j);
      detail::require_finite(terms.covar, "covar", k, j);

      z = z_next;
      e = e_next;
      pb = pb_next;
    }

    terms.log_eta = bundle(model, obs, o.time, path.state(last), k).log_eta;
    detail::require_finite(terms.log_eta, "log_eta", k, last);
    out.total += terms.sum();
  }

  if (model.drift_split) {
    out.girsanov = girsanov_correction(path, model);
    out.total += out.girsanov;
  }
  return out;
}

struct NormalizedWeights {
  std::vector<double> weights;
  /// log of sum_i exp(logw_i)
  double log_norm = 0.0;
  double ess = 0.0;
};

/// Self-normalized weights exp(logw - max) / sum, and ESS = 1 / sum w_i^2.
/// Entries of -inf carry zero mass.
inline NormalizedWeights normalize_log_weights(std::span<const double> logw) {
  if (logw.empty()) {
    throw Error(ErrorKind::DegenerateEnsemble, "no log-weights to normalize");
  }
  double top = -std::numeric_limits<double>::infinity();
  for (double lw : logw) {
    if (std::isnan(lw) || lw == std::numeric_limits<double>::infinity()) {
      throw Error(ErrorKind::WeightOverflow, "log-weights must be finite or -inf");
    }
    top = std::max(top, lw);
  }
  if (top == -std::numeric_limits<double>::infinity()) {
    throw Error(ErrorKind::DegenerateEnsemble, "every log-weight is -inf");
  }

  NormalizedWeights out;
  out.weights.resize(logw.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logw.size(); ++i) {
    out.weights[i] = std::exp(logw[i] - top);
    sum += out.weights[i];
  }
  double sum_sq = 0.0;
  for (double& w : out.weights) {
    w /= sum;
    sum_sq += w * w;
  }
  out.log_norm = top + std::log(sum);
  out.ess = 1.0 / sum_sq;
  return out;
}

}  // namespace bridgesim
