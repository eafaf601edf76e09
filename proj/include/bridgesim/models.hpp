#pragma once

// Built-in coefficient families selectable from a run configuration.

#include <optional>
#include <string>

#include "bridgesim/error.hpp"
#include "bridgesim/model.hpp"
#include "bridgesim/oracle.hpp"

namespace bridgesim {

struct BuiltinModel {
  std::string name = "brownian";  // brownian | drifted_brownian | ou | double_well
  int dim = 1;
  Matrix sigma;  // constant diffusion; identity when empty
  Vector F;      // ou: diagonal drift matrix
  Vector c;      // drifted_brownian, ou: constant drift term
  bool drift_split = false;
  /// Componentwise bound B of the split b_bounded = clamp(b, -B, B).
  double split_bound = 10.0;
  double ellipticity_bound = 1e6;

  bool is_linear() const { return name != "double_well"; }
};

namespace detail {

inline Vector clamp_components(const Vector& v, double bound) {
  return v.cwiseMax(-bound).cwiseMin(bound);
}

/// Fills defaults and checks shapes; returns the normalized description.
inline BuiltinModel normalize(BuiltinModel m) {
  if (m.dim < 1) throw Error(ErrorKind::InvalidConfiguration, "dim must be >= 1").at("dim");
  const auto n = static_cast<Eigen::Index>(m.dim);
  if (m.sigma.size() == 0) m.sigma = Matrix::Identity(n, n);
  if (m.sigma.rows() != n || m.sigma.cols() != n) {
    throw Error(ErrorKind::InvalidConfiguration, "sigma must be dim x dim").at("sigma");
  }
  if (m.F.size() == 0) m.F = Vector::Zero(n);
  if (m.c.size() == 0) m.c = Vector::Zero(n);
  if (m.F.size() != n) throw Error(ErrorKind::InvalidConfiguration, "F must have dim entries").at("F");
  if (m.c.size() != n) throw Error(ErrorKind::InvalidConfiguration, "c must have dim entries").at("c");
  if (!(m.split_bound >= 0.0)) {
    throw Error(ErrorKind::InvalidConfiguration, "bound must be non-negative").at("bound");
  }
  if (m.name == "brownian") {
    if (!m.F.isZero() || !m.c.isZero()) {
      throw Error(ErrorKind::InvalidConfiguration, "brownian takes no drift parameters").at("name");
    }
  } else if (m.name == "drifted_brownian") {
    if (!m.F.isZero()) {
      throw Error(ErrorKind::InvalidConfiguration, "drifted_brownian takes no F").at("F");
    }
  } else if (m.name != "ou" && m.name != "double_well") {
    throw Error(ErrorKind::InvalidConfiguration, "unknown model '" + m.name + "'").at("name");
  }
  return m;
}

}  // namespace detail

/// Coefficient functions of a built-in model. The double well has drift
/// b(x) = x - x^3 componentwise; the others are linear, b(x) = F x + c.
/// With `drift_split`, b_bounded = clamp(b, -B, B) and b_unbounded = b - b_bounded.
inline ModelSpec make_model(const BuiltinModel& description) {
  const BuiltinModel m = detail::normalize(description);
  ModelSpec spec;
  spec.dim = m.dim;
  spec.ellipticity_bound = m.ellipticity_bound;
  if (m.name == "double_well") {
    spec.drift = [](double, const Vector& z) -> Vector {
      return z - z.array().cube().matrix();
    };
  } else {
    spec.drift = [F = m.F, c = m.c](double, const Vector& z) -> Vector {
      return F.cwiseProduct(z) + c;
    };
  }
  spec.diffusion = [S = m.sigma](double, const Vector&) -> Matrix { return S; };
  if (m.drift_split) {
    const double bound = m.split_bound;
    DriftFn full = spec.drift;
    spec.drift_split = DriftSplit{
        [full, bound](double t, const Vector& z) -> Vector {
          return detail::clamp_components(full(t, z), bound);
        },
        [full, bound](double t, const Vector& z) -> Vector {
          const Vector b = full(t, z);
          return b - detail::clamp_components(b, bound);
        }};
  }
  return spec;
}

/// Linear-Gaussian description for the exact oracle, when one exists.
inline std::optional<LinearModel> linear_model(const BuiltinModel& description,
                                               const Vector& u) {
  const BuiltinModel m = detail::normalize(description);
  if (!m.is_linear()) return std::nullopt;
  return LinearModel{m.F, m.c, m.sigma, u};
}

}  // namespace bridgesim
