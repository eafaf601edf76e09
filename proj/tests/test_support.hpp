#pragma once

// Shared fixtures for the unit and acceptance suites.

#include <cmath>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "bridgesim/grid.hpp"
#include "bridgesim/model.hpp"
#include "bridgesim/observation.hpp"

namespace bridgesim::testing {

inline ModelSpec brownian(int dim) {
  ModelSpec m;
  m.dim = dim;
  m.drift = [dim](double, const Vector&) -> Vector { return Vector::Zero(dim); };
  m.diffusion = [dim](double, const Vector&) -> Matrix { return Matrix::Identity(dim, dim); };
  return m;
}

inline ModelSpec constant_model(const Vector& drift, const Matrix& sigma) {
  ModelSpec m;
  m.dim = static_cast<int>(drift.size());
  m.drift = [drift](double, const Vector&) -> Vector { return drift; };
  m.diffusion = [sigma](double, const Vector&) -> Matrix { return sigma; };
  return m;
}

/// b(x) = -x componentwise, sigma = s I.
inline ModelSpec ornstein_uhlenbeck(int dim, double s = 1.0) {
  ModelSpec m;
  m.dim = dim;
  m.drift = [](double, const Vector& z) -> Vector { return -z; };
  m.diffusion = [dim, s](double, const Vector&) -> Matrix { return s * Matrix::Identity(dim, dim); };
  return m;
}

/// State-dependent diffusion sigma(t,z) = (1 + 0.3 sin z_0 + 0.2 t) I + 0.2 offdiag, elliptic.
inline ModelSpec state_dependent(int dim) {
  ModelSpec m;
  m.dim = dim;
  m.drift = [](double t, const Vector& z) -> Vector {
    return (-0.5 * z.array() + std::cos(t)).matrix();
  };
  m.diffusion = [dim](double t, const Vector& z) -> Matrix {
    Matrix s = (1.0 + 0.3 * std::sin(z[0]) + 0.2 * t) * Matrix::Identity(dim, dim);
    for (int i = 0; i + 1 < dim; ++i) s(i, i + 1) = 0.2 * std::cos(z[i + 1]);
    return s;
  };
  return m;
}

inline Observation observe(double time, Matrix L, Vector v, std::optional<double> window = {}) {
  Observation o;
  o.time = time;
  o.matrix = std::move(L);
  o.value = std::move(v);
  o.window = window;
  return o;
}

inline Matrix row(std::initializer_list<double> xs) {
  Matrix m(1, static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) m(0, i++) = x;
  return m;
}

inline Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

inline std::shared_ptr<const TimeGrid> shared_grid(double horizon, const ObservationSet& obs,
                                                   GridOptions opt,
                                                   std::vector<double> extra = {}) {
  return std::make_shared<const TimeGrid>(build_grid(horizon, obs, opt, extra));
}

/// Random orthonormal m x n matrix (rows orthonormal).
inline Matrix random_orthonormal_rows(int m, int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Matrix x(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) x(i, j) = g(rng);
  const Eigen::HouseholderQR<Matrix> qr(x);
  const Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  return q.leftCols(m).transpose();
}

/// Random SPD matrix with eigenvalues log-uniform in [1/sqrt(cond), sqrt(cond)].
inline Matrix random_spd(int n, double cond, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  const Matrix q = random_orthonormal_rows(n, n, rng);
  Vector lambda(n);
  for (int i = 0; i < n; ++i) lambda[i] = std::pow(cond, u(rng));
  if (n > 1) {
    lambda[0] = std::pow(cond, -0.5);
    lambda[n - 1] = std::pow(cond, 0.5);
  }
  return q.transpose() * lambda.asDiagonal() * q;
}

}  // namespace bridgesim::testing
