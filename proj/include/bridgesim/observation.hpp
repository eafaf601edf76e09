#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bridgesim/error.hpp"
#include "bridgesim/model.hpp"

namespace bridgesim {

/// One partial observation L x_T = v. `window` is the length eps of the
/// guidance interval (T - eps, T); `anchor` is any u with L u = v.
struct Observation {
  double time = 0.0;
  Matrix matrix;
  Vector value;
  std::optional<double> window;
  std::optional<Vector> anchor;

  int rows() const { return static_cast<int>(matrix.rows()); }
};

struct ObservationSet {
  std::vector<Observation> items;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
  const Observation& operator[](std::size_t k) const { return items[k]; }

  double window(std::size_t k) const { return items[k].window.value(); }
  double window_start(std::size_t k) const { return items[k].time - window(k); }
  double last_time() const { return items.empty() ? 0.0 : items.back().time; }

  /// Smallest guidance window, eps_0 = min_k eps_k.
  double min_window() const {
    double out = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < items.size(); ++k) out = std::min(out, window(k));
    return out;
  }
};

namespace detail {

inline Error observation_error(std::size_t k, const std::string& field,
                               const std::string& message) {
  return Error(ErrorKind::InvalidObservation, message)
      .at("[" + std::to_string(k) + "]." + field);
}

}  // namespace detail

/// Checks the observation invariants and fills defaults: window defaults to
/// T_k - T_{k-1}, anchor to L_k^T v_k. `dim` is the state dimension.
inline ObservationSet validate(const ObservationSet& obs, int dim) {
  ObservationSet out = obs;
  double previous = 0.0;
  for (std::size_t k = 0; k < out.items.size(); ++k) {
    Observation& o = out.items[k];
    if (!std::isfinite(o.time) || o.time <= previous) {
      throw detail::observation_error(
          k, "time", "observation times must be positive and strictly increasing times");
    }
    if (o.matrix.cols() != dim || o.matrix.rows() < 1 || o.matrix.rows() > dim) {
      throw detail::observation_error(
          k, "matrix", "observation matrix must be m x " + std::to_string(dim) +
                           " with 1 <= m <= " + std::to_string(dim));
    }
    if (o.value.size() != o.matrix.rows()) {
      throw detail::observation_error(k, "value",
                                      "observation value length must equal matrix rows");
    }
    const Matrix gram = o.matrix * o.matrix.transpose();
    const double gram_dev =
        (gram - Matrix::Identity(gram.rows(), gram.cols())).lpNorm<Eigen::Infinity>();
    if (!(gram_dev <= 1e-10)) {
      throw detail::observation_error(
          k, "matrix",
          "observation matrix rows are not orthonormal (Gram deviation " +
              std::to_string(gram_dev) + ")");
    }
    const double gap = o.time - previous;
    if (!o.window) o.window = gap;
    if (!(*o.window > 0.0) || *o.window > gap * (1.0 + 1e-12)) {
      throw detail::observation_error(
          k, "window",
          "window must satisfy 0 < eps_k <= T_k - T_{k-1} (got " +
              std::to_string(*o.window) + ", gap " + std::to_string(gap) + ")");
    }
    o.window = std::min(*o.window, gap);
    if (!o.anchor) {
      o.anchor = Vector(o.matrix.transpose() * o.value);
    }
    if (o.anchor->size() != dim) {
      throw detail::observation_error(k, "anchor", "anchor length must equal dimension");
    }
    const double anchor_dev = (o.matrix * *o.anchor - o.value).lpNorm<Eigen::Infinity>();
    if (!(anchor_dev <= 1e-10)) {
      throw detail::observation_error(k, "anchor", "anchor does not satisfy L u = v");
    }
    previous = o.time;
  }
  return out;
}

/// A = (L a L^T)^{-1}, beta = sigma^T L^T A, P = a L^T A L and
/// log_eta = 0.5 log det A.
struct ProjectionBundle {
  Matrix A;
  Matrix beta;
  Matrix P;
  double log_eta = 0.0;
};

namespace detail {

/// Factorizes L a L^T. Failure means a(t,z) left the elliptic regime.
inline Eigen::LLT<Matrix> factor_observed_covariance(const Matrix& L, const Matrix& a) {
  const Matrix gram = L * a * L.transpose();
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success || !(llt.matrixLLT().diagonal().array() > 0.0).all()) {
    throw Error(ErrorKind::EllipticityViolation,
                "L a L^T is not numerically positive definite");
  }
  return llt;
}

}  // namespace detail

inline ProjectionBundle bundle(const ModelSpec& model, const ObservationSet& obs,
                               double t, const Vector& z, std::size_t k) {
  const Matrix& L = obs[k].matrix;
  const Matrix sigma = model.diffusion(t, z);
  const Matrix a = sigma * sigma.transpose();
  const auto llt = detail::factor_observed_covariance(L, a);
  const auto m = L.rows();

  ProjectionBundle out;
  out.A = llt.solve(Matrix::Identity(m, m));
  out.A = 0.5 * (out.A + out.A.transpose());
  out.beta = sigma.transpose() * L.transpose() * out.A;
  out.P = a * L.transpose() * out.A * L;
  // det A = 1 / det(L a L^T) = 1 / prod(diag(chol))^2
  out.log_eta = -llt.matrixLLT().diagonal().array().log().sum();
  return out;
}

/// Pull toward observation k: a L^T A (L z - v) / (T_k - t), without sign
/// or indicator. Equals sigma beta (L z - v) / (T_k - t).
inline Vector guiding_term(const ModelSpec& model, const ObservationSet& obs, double t,
                           const Vector& z, std::size_t k) {
  const Observation& o = obs[k];
  const Matrix a = model.diffusion_matrix(t, z);
  const auto llt = detail::factor_observed_covariance(o.matrix, a);
  const Vector innovation = o.matrix * z - o.value;
  return a * o.matrix.transpose() * llt.solve(innovation) / (o.time - t);
}

/// Guiding drift -sum_k 1{T_k - eps_k < t < T_k} sigma beta_k (L_k z - v_k)/(T_k - t).
inline Vector guiding_drift(const ModelSpec& model, const ObservationSet& obs, double t,
                            const Vector& z) {
  Vector out = Vector::Zero(z.size());
  for (std::size_t k = 0; k < obs.size(); ++k) {
    if (t > obs.window_start(k) && t < obs[k].time) {
      out -= guiding_term(model, obs, t, z, k);
    }
  }
  return out;
}

}  // namespace bridgesim
