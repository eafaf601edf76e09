#include <cmath>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "bridgesim/observation.hpp"
#include "test_support.hpp"

namespace bridgesim {
namespace {

using testing::observe;
using testing::row;
using testing::vec;

Error validation_error(const ObservationSet& obs, int dim) {
  try {
    validate(obs, dim);
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "validation unexpectedly succeeded";
  return Error(ErrorKind::InvalidInput, "");
}

TEST(ValidateTest, DefaultsAnchorToMinimalNormPreimage) {
  const ObservationSet obs = validate(ObservationSet{{observe(1.0, row({1, 0}), vec({5}))}}, 2);
  EXPECT_EQ(*obs[0].anchor, vec({5, 0}));
}

TEST(ValidateTest, DefaultsWindowToGapSincePreviousObservation) {
  const ObservationSet obs = validate(
      ObservationSet{{observe(0.4, row({1, 0}), vec({0})), observe(1.0, row({0, 1}), vec({0}))}}, 2);
  EXPECT_DOUBLE_EQ(obs.window(0), 0.4);
  EXPECT_DOUBLE_EQ(obs.window(1), 0.6);
  EXPECT_DOUBLE_EQ(obs.min_window(), 0.4);
}

TEST(ValidateTest, RejectsNonOrthonormalRowsAndReportsGramDeviation) {
  const Error e = validation_error(ObservationSet{{observe(1.0, row({1, 1}), vec({0}))}}, 2);
  EXPECT_EQ(e.kind(), ErrorKind::InvalidObservation);
  EXPECT_EQ(e.field(), "[0].matrix");
  EXPECT_NE(std::string(e.what()).find("Gram deviation"), std::string::npos);
}

TEST(ValidateTest, AcceptsNormalizedDiagonalRow) {
  const double r = 1.0 / std::sqrt(2.0);
  EXPECT_NO_THROW(validate(ObservationSet{{observe(1.0, row({r, r}), vec({0}))}}, 2));
}

TEST(ValidateTest, RejectsWindowReachingPastPreviousObservation) {
  const Error e = validation_error(
      ObservationSet{{observe(0.5, row({1, 0}), vec({0})), observe(1.0, row({0, 1}), vec({0}), 1.0)}},
      2);
  EXPECT_EQ(e.kind(), ErrorKind::InvalidObservation);
  EXPECT_EQ(e.field(), "[1].window");
}

TEST(ValidateTest, RejectsDuplicateTimes) {
  const Error e = validation_error(
      ObservationSet{{observe(0.5, row({1, 0}), vec({0})), observe(0.5, row({0, 1}), vec({0}))}}, 2);
  EXPECT_EQ(e.kind(), ErrorKind::InvalidObservation);
  EXPECT_NE(std::string(e.what()).find("strictly increasing times"), std::string::npos);
}

TEST(ValidateTest, RejectsAnchorOffTheConstraint) {
  Observation o = observe(1.0, row({1, 0}), vec({1}));
  o.anchor = vec({0.5, 3});
  const Error e = validation_error(ObservationSet{{o}}, 2);
  EXPECT_EQ(e.field(), "[0].anchor");
}

TEST(BundleTest, IdentityDiffusionWithCoordinateObservation) {
  const ModelSpec m = testing::brownian(2);
  const ObservationSet obs = validate(ObservationSet{{observe(1.0, row({1, 0}), vec({0}))}}, 2);
  const ProjectionBundle b = bundle(m, obs, 0.3, vec({0.1, -2}), 0);
  EXPECT_EQ(b.A, Matrix::Identity(1, 1));
  EXPECT_EQ(b.beta, (Matrix(2, 1) << 1, 0).finished());
  EXPECT_EQ(b.P, (Matrix(2, 2) << 1, 0, 0, 0).finished());
  EXPECT_EQ(b.log_eta, 0.0);
}

TEST(BundleTest, DiagonalDiffusionMatchesGenericInverseAndDeterminant) {
  const Matrix sigma = vec({1, 2}).asDiagonal();
  const ModelSpec m = testing::constant_model(Vector::Zero(2), sigma);
  const ObservationSet obs = validate(ObservationSet{{observe(1.0, row({0, 1}), vec({0}))}}, 2);
  const ProjectionBundle b = bundle(m, obs, 0.0, Vector::Zero(2), 0);

  // Oracle: explicit LU inverse and determinant of L a L^T.
  const Matrix L = row({0, 1});
  const Matrix a = sigma * sigma.transpose();
  const Eigen::FullPivLU<Matrix> lu(L * a * L.transpose());
  const Matrix A = lu.inverse();
  EXPECT_NEAR(b.A(0, 0), A(0, 0), 1e-15);
  EXPECT_NEAR(b.A(0, 0), 0.25, 1e-15);
  EXPECT_TRUE(b.beta.isApprox((Matrix(2, 1) << 0, 0.5).finished(), 1e-15));
  EXPECT_TRUE(b.P.isApprox((Matrix(2, 2) << 0, 0, 0, 1).finished(), 1e-15));
  EXPECT_NEAR(b.log_eta, 0.5 * std::log(1.0 / lu.determinant()), 1e-15);
  EXPECT_NEAR(b.log_eta, 0.5 * std::log(0.25), 1e-15);
}

TEST(BundleTest, SingularDiffusionIsAnEllipticityViolation) {
  const ModelSpec m = testing::constant_model(Vector::Zero(2), Matrix::Zero(2, 2));
  const ObservationSet obs = validate(ObservationSet{{observe(1.0, row({1, 0}), vec({0}))}}, 2);
  try {
    bundle(m, obs, 0.0, Vector::Zero(2), 0);
    FAIL() << "expected ellipticity violation";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EllipticityViolation);
  }
}

TEST(BundlePropertyTest, ProjectionIdentitiesOnRandomInstances) {
  std::mt19937_64 rng(20240611);
  std::uniform_int_distribution<int> pick_n(1, 6);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = pick_n(rng);
    const int m = std::uniform_int_distribution<int>(1, n)(rng);
    const double cond = 1e3;
    const Matrix a = testing::random_spd(n, cond, rng);
    // a non-symmetric square root: chol(a) times a random rotation
    const Matrix sigma = Matrix(a.llt().matrixL()) * testing::random_orthonormal_rows(n, n, rng);
    const ModelSpec model = testing::constant_model(Vector::Zero(n), sigma);
    const Matrix L = testing::random_orthonormal_rows(m, n, rng);
    const ObservationSet obs = validate(ObservationSet{{observe(1.0, L, Vector::Zero(m))}}, n);

    const ProjectionBundle b = bundle(model, obs, 0.5, Vector::Zero(n), 0);
    const Matrix I_m = Matrix::Identity(m, m);
    EXPECT_LE((L * b.P - L).norm(), 1e-10) << "trial " << trial;
    EXPECT_LE((b.P * b.P - b.P).norm(), 1e-10) << "trial " << trial;
    EXPECT_LE((b.beta.transpose() * b.beta - b.A).norm(), 1e-10) << "trial " << trial;
    EXPECT_LE((L * sigma * b.beta - I_m).norm(), 1e-10) << "trial " << trial;

    // ker L is annihilated by P
    Vector z(n);
    for (int i = 0; i < n; ++i) z[i] = unit(rng);
    const Vector in_kernel = z - L.transpose() * (L * z);
    EXPECT_LE((b.P * in_kernel).norm(), 1e-10 * std::max(1.0, in_kernel.norm()));

    // spectrum of A stays within the ellipticity bounds of a
    const double rho = std::sqrt(cond) * (1 + 1e-9);
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(b.A);
    EXPECT_GE(eig.eigenvalues().minCoeff(), 1.0 / rho);
    EXPECT_LE(eig.eigenvalues().maxCoeff(), rho);
  }
}

TEST(GuidingDriftTest, ZeroOutsideEveryWindow) {
  const ModelSpec m = testing::brownian(2);
  const ObservationSet obs =
      validate(ObservationSet{{observe(1.0, row({1, 0}), vec({0.3}), 0.25)}}, 2);
  EXPECT_EQ(guiding_drift(m, obs, 0.5, vec({4, 5})), Vector::Zero(2));
  EXPECT_EQ(guiding_drift(m, obs, 0.75, vec({4, 5})), Vector::Zero(2));
}

TEST(GuidingDriftTest, TwoCoordinateBrownianBridgeDisplay) {
  // Guidance toward w^1_S = u and w^2_T = v, both active on (0, S).
  const double S = 0.5, T = 1.0, u = 0.3, v = -0.2;
  const ModelSpec m = testing::brownian(2);
  ObservationSet obs{{observe(S, row({1, 0}), vec({u}), S), observe(T, row({0, 1}), vec({v}), T)}};
  for (auto& o : obs.items) o.anchor = Vector(o.matrix.transpose() * o.value);
  const Vector z = vec({1.1, -0.7});
  for (double t : {0.1, 0.3, 0.49}) {
    const Vector expected = vec({-(z[0] - u) / (S - t), -(z[1] - v) / (T - t)});
    EXPECT_TRUE(guiding_drift(m, obs, t, z).isApprox(expected, 1e-14)) << t;
  }
  const Vector late = guiding_drift(m, obs, 0.7, z);
  EXPECT_EQ(late[0], 0.0);
  EXPECT_NEAR(late[1], -(z[1] - v) / (T - 0.7), 1e-14);
}

TEST(GuidingDriftTest, ProjectionFormWithAnyAnchorAgrees) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  const int n = 3;
  const ModelSpec model = testing::state_dependent(n);
  const Matrix L = testing::random_orthonormal_rows(2, n, rng);
  const Vector v = vec({0.4, -1.0});
  const ObservationSet obs = validate(ObservationSet{{observe(1.0, L, v)}}, n);
  for (int trial = 0; trial < 50; ++trial) {
    Vector z(n), q(n);
    for (int i = 0; i < n; ++i) {
      z[i] = g(rng);
      q[i] = g(rng);
    }
    q -= L.transpose() * (L * q);  // L q = 0
    const Vector anchor = *obs[0].anchor + q;
    const double t = 0.2 + 0.7 * std::abs(std::sin(trial));
    const ProjectionBundle b = bundle(model, obs, t, z, 0);
    const Vector via_projection = -b.P * (z - anchor) / (1.0 - t);
    EXPECT_LE((guiding_drift(model, obs, t, z) - via_projection).norm(),
              1e-12 * std::max(1.0, via_projection.norm()));
  }
}

}  // namespace
}  // namespace bridgesim
