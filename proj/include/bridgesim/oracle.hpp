#pragma once

// Exact Gaussian laws for dx = (F x + c) dt + Sigma dW with diagonal F and
// constant Sigma. Used as ground truth for conditioned estimates.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bridgesim/error.hpp"
#include "bridgesim/model.hpp"
#include "bridgesim/observation.hpp"

namespace bridgesim {

struct LinearModel {
  Vector F;  // diagonal of the drift matrix
  Vector c;
  Matrix Sigma;
  Vector u;

  int dim() const { return static_cast<int>(F.size()); }

  ModelSpec to_model_spec() const {
    ModelSpec m;
    m.dim = dim();
    m.drift = [F = F, c = c](double, const Vector& z) -> Vector {
      return F.cwiseProduct(z) + c;
    };
    m.diffusion = [S = Sigma](double, const Vector&) -> Matrix { return S; };
    return m;
  }
};

struct GaussianLaw {
  Vector mean;
  Matrix cov;
};

namespace detail {

// (e^{rate t} - 1) / rate, continuous at rate = 0
inline double expm1_ratio(double rate, double t) {
  return rate == 0.0 ? t : std::expm1(rate * t) / rate;
}

}  // namespace detail

/// Joint law of (x_{t_1}, ..., x_{t_K}) stacked in time order.
inline GaussianLaw joint_law(const LinearModel& lm, std::span<const double> times) {
  if (times.empty()) throw Error(ErrorKind::InvalidInput, "joint_law needs at least one time");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < 0.0 || (i > 0 && times[i] < times[i - 1])) {
      throw Error(ErrorKind::InvalidInput, "joint_law times must be sorted and non-negative");
    }
  }
  const int n = lm.dim();
  const auto count = static_cast<int>(times.size());
  const Matrix Q = lm.Sigma * lm.Sigma.transpose();

  GaussianLaw law;
  law.mean.resize(n * count);
  law.cov.resize(n * count, n * count);

  auto marginal_cov = [&](double t) {
    Matrix V(n, n);
    for (int i = 0; i < n; ++i) {
      for (int l = 0; l < n; ++l) V(i, l) = Q(i, l) * detail::expm1_ratio(lm.F[i] + lm.F[l], t);
    }
    return V;
  };

  for (int a = 0; a < count; ++a) {
    const double t = times[static_cast<std::size_t>(a)];
    for (int i = 0; i < n; ++i) {
      law.mean[a * n + i] =
          std::exp(lm.F[i] * t) * lm.u[i] + lm.c[i] * detail::expm1_ratio(lm.F[i], t);
    }
    const Matrix V = marginal_cov(t);
    for (int b = a; b < count; ++b) {
      const double gap = times[static_cast<std::size_t>(b)] - t;
      // Cov(x_s, x_t) = V(s) e^{F^T (t - s)} for s <= t
      Matrix block = V;
      for (int l = 0; l < n; ++l) block.col(l) *= std::exp(lm.F[l] * gap);
      law.cov.block(a * n, b * n, n, n) = block;
      law.cov.block(b * n, a * n, n, n) = block.transpose();
    }
  }
  return law;
}

/// Law of X given S X = value. Directions of S X that already have zero
/// variance (a law conditioned before) are accepted when `value` agrees with
/// the mean along them; otherwise the constraint is degenerate.
inline GaussianLaw condition(const GaussianLaw& law, const Matrix& selector,
                             const Vector& value) {
  const Matrix SC = selector * law.cov;
  const Matrix gram = SC * selector.transpose();
  const Vector residual = value - selector * law.mean;
  const double tol = 1e-12 * std::max(1.0, law.cov.diagonal().cwiseAbs().maxCoeff());
  GaussianLaw out;

  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() == Eigen::Success &&
      llt.matrixLLT().diagonal().array().square().minCoeff() > tol) {
    out.mean = law.mean + SC.transpose() * llt.solve(residual);
    out.cov = law.cov - SC.transpose() * llt.solve(SC);
  } else {
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    const Vector& lambda = eig.eigenvalues();
    const Matrix& U = eig.eigenvectors();
    Matrix pinv = Matrix::Zero(gram.rows(), gram.cols());
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
      if (lambda[i] > tol) {
        pinv += U.col(i) * U.col(i).transpose() / lambda[i];
      } else if (std::abs(U.col(i).dot(residual)) > 1e-10 * (1.0 + residual.norm())) {
        throw Error(ErrorKind::DegenerateConditioning,
                    "S cov S^T is singular and the value is inconsistent with the law");
      }
    }
    out.mean = law.mean + SC.transpose() * (pinv * residual);
    out.cov = law.cov - SC.transpose() * pinv * SC;
  }
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

/// Conditional law of the states at `times` (sorted) given every
/// observation L_k x_{T_k} = v_k. Returned law is stacked over `times`.
inline GaussianLaw conditional_law(const LinearModel& lm, const ObservationSet& obs,
                                   std::span<const double> times) {
  const int n = lm.dim();
  std::vector<double> all(times.begin(), times.end());
  for (const auto& o : obs.items) all.push_back(o.time);
  std::vector<double> sorted = all;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  auto slot = [&](double t) {
    return static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), t) - sorted.begin());
  };

  const GaussianLaw joint = joint_law(lm, sorted);
  int rows = 0;
  for (const auto& o : obs.items) rows += o.rows();
  Matrix S = Matrix::Zero(rows, joint.mean.size());
  Vector v(rows);
  int r = 0;
  for (const auto& o : obs.items) {
    S.block(r, slot(o.time) * n, o.rows(), n) = o.matrix;
    v.segment(r, o.rows()) = o.value;
    r += o.rows();
  }
  const GaussianLaw post = rows > 0 ? condition(joint, S, v) : joint;

  const auto count = static_cast<int>(times.size());
  GaussianLaw out;
  out.mean.resize(n * count);
  out.cov.resize(n * count, n * count);
  for (int a = 0; a < count; ++a) {
    const int sa = slot(times[static_cast<std::size_t>(a)]);
    out.mean.segment(a * n, n) = post.mean.segment(sa * n, n);
    for (int b = 0; b < count; ++b) {
      const int sb = slot(times[static_cast<std::size_t>(b)]);
      out.cov.block(a * n, b * n, n, n) = post.cov.block(sa * n, sb * n, n, n);
    }
  }
  return out;
}

}  // namespace bridgesim
