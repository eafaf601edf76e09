#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "bridgesim/error.hpp"

namespace bridgesim {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

using DriftFn = std::function<Vector(double, const Vector&)>;
using DiffusionFn = std::function<Matrix(double, const Vector&)>;

/// Decomposition b = bounded + unbounded used for the Girsanov-corrected
/// sampler: paths follow the bounded part, the remainder is reweighted.
struct DriftSplit {
  DriftFn bounded;
  DriftFn unbounded;
};

/// Coefficients of dx = b(t,x) dt + sigma(t,x) dW with square sigma.
/// Coefficient functions must be pure; they are called concurrently.
/// Smoothness of b, sigma and a^{-1} is the caller's obligation.
struct ModelSpec {
  int dim = 1;
  DriftFn drift;
  DiffusionFn diffusion;
  std::optional<DriftSplit> drift_split;
  double ellipticity_bound = 1e6;

  Matrix diffusion_matrix(double t, const Vector& z) const {
    const Matrix s = diffusion(t, z);
    return s * s.transpose();
  }

  /// Model whose drift is the bounded part of the split (the drift the
  /// proposal is simulated under). Returns *this when there is no split.
  ModelSpec proposal_model() const {
    if (!drift_split) return *this;
    ModelSpec out = *this;
    out.drift = drift_split->bounded;
    out.drift_split.reset();
    return out;
  }
};

/// Throws ellipticity-violation unless rho^{-1} I <= a(t,z) <= rho I.
inline void check_ellipticity(const ModelSpec& model, double t, const Vector& z) {
  const Matrix a = model.diffusion_matrix(t, z);
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(a, Eigen::EigenvaluesOnly);
  const double rho = model.ellipticity_bound;
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo >= 1.0 / rho) || !(hi <= rho)) {
    throw Error(ErrorKind::EllipticityViolation,
                "diffusion matrix eigenvalues [" + std::to_string(lo) + ", " +
                    std::to_string(hi) + "] outside [1/rho, rho] at t=" +
                    std::to_string(t));
  }
}

/// Structural checks on a model: dimensions, ellipticity at (t, z), and the
/// split identity b = b_bounded + b_unbounded at that point.
inline void validate_model(const ModelSpec& model, double t, const Vector& z) {
  if (model.dim <= 0) {
    throw Error(ErrorKind::InvalidConfiguration, "model dimension must be positive");
  }
  if (!model.drift || !model.diffusion) {
    throw Error(ErrorKind::InvalidConfiguration, "model drift and diffusion must be set");
  }
  if (!(model.ellipticity_bound > 0.0)) {
    throw Error(ErrorKind::InvalidConfiguration, "ellipticity bound must be positive");
  }
  if (z.size() != model.dim) {
    throw Error(ErrorKind::InvalidConfiguration, "state dimension does not match model");
  }
  const Vector b = model.drift(t, z);
  const Matrix s = model.diffusion(t, z);
  if (b.size() != model.dim || s.rows() != model.dim || s.cols() != model.dim) {
    throw Error(ErrorKind::InvalidConfiguration,
                "coefficient output shape does not match model dimension");
  }
  check_ellipticity(model, t, z);
  if (model.drift_split) {
    const Vector sum = model.drift_split->bounded(t, z) + model.drift_split->unbounded(t, z);
    if ((sum - b).lpNorm<Eigen::Infinity>() > 1e-12 * (1.0 + b.lpNorm<Eigen::Infinity>())) {
      throw Error(ErrorKind::InvalidConfiguration,
                  "drift split does not add up to the drift");
    }
  }
}

}  // namespace bridgesim
