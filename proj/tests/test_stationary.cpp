#include <gtest/gtest.h>

#include "dlqr/descent.hpp"
#include "dlqr/stationary.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using dlqr::Controller;
using dlqr::Matrix;

namespace {

void expect_scalar_controller(const Controller& k, double a, double b, double c, double tol) {
  EXPECT_NEAR(k.A_K(0, 0), a, tol);
  EXPECT_NEAR(k.B_K(0, 0), b, tol);
  EXPECT_NEAR(k.C_K(0, 0), c, tol);
}

}  // namespace

TEST(StationaryCandidate, ExampleOne) {
  const auto cert = dlqr::stationary_candidate(fixtures::example1(), fixtures::example_moment());
  expect_scalar_controller(cert.K_star, -0.944, 4.4, -0.236, 5e-4);
  // p^2 - 5.21 p - 5 = 0 gives p = 6.0380777, K = 1.1 p / (1 + p) = 0.9437073.
  const double p = oracle::scalar_dare(1.1, 1, 5, 1);
  EXPECT_NEAR(cert.P_hat(0, 0), p, 1e-10);
  EXPECT_NEAR(cert.P_hat(0, 0), 6.038078, 5e-7);
  EXPECT_NEAR(cert.K_gain(0, 0), 1.1 * p / (1 + p), 1e-12);
  EXPECT_NEAR(cert.K_gain(0, 0), 0.943707, 5e-7);
  EXPECT_NEAR(cert.L_gain(0, 0), 1.1, 1e-12);
  EXPECT_NEAR(cert.Sigma_hat(0, 0), 0.9375, 1e-12);
  EXPECT_NEAR(cert.Delta_X(0, 0), 0.9375, 1e-15);
  EXPECT_NEAR(cert.T_star.T()(0, 0), 4.0, 1e-12);
  EXPECT_NEAR(cert.J, 11.914, 1e-3);
  EXPECT_TRUE(cert.verified());
}

TEST(StationaryCandidate, ExampleTwo) {
  const auto cert = dlqr::stationary_candidate(fixtures::example2(), fixtures::example_moment());
  expect_scalar_controller(cert.K_star, -0.765, 3.6, -0.191, 5e-4);
  EXPECT_NEAR(cert.L_gain(0, 0), 0.9, 1e-12);
  EXPECT_NEAR(cert.Sigma_hat(0, 0), 0.9375, 1e-12);
  EXPECT_NEAR(cert.T_star.T()(0, 0), 4.0, 1e-12);
  EXPECT_TRUE(cert.verified());
}

namespace {

struct Shape {
  Eigen::Index n, m, d;
};

void expect_separation(const dlqr::Plant& p, const dlqr::StationaryCertificate& cert) {
  EXPECT_EQ(cert.K_star, dlqr::apply(cert.K_dagger, cert.T_star));
  EXPECT_LT(dlqr::spectral_radius(Matrix(p.A() - p.B() * cert.K_gain)), 1.0);
  EXPECT_LT(dlqr::spectral_radius(Matrix(p.A() - cert.L_gain * p.C())), 1.0);
  EXPECT_TRUE(dlqr::is_positive_definite(cert.P_hat));
  EXPECT_TRUE(dlqr::is_positive_definite(cert.Sigma_hat));

  // K_gain is the state-feedback LQR gain, computed independently here.
  const Matrix P = dlqr::solve_dare_control(p.A(), p.B(), p.Q(), p.R());
  const Matrix K =
      (p.R() + p.B().transpose() * P * p.B()).ldlt().solve(Matrix(p.B().transpose() * P * p.A()));
  EXPECT_LE((cert.K_gain - K).norm(), 1e-10 * (1 + K.norm()));
}

}  // namespace

TEST(StationaryCandidate, StructuralInvariantsWhenInputsCoverOutputs) {
  const Shape shapes[] = {{1, 1, 1}, {2, 1, 1}, {2, 2, 1}, {2, 2, 2}, {3, 1, 1},
                          {3, 2, 1}, {3, 2, 2}, {3, 3, 2}, {3, 3, 3}, {4, 2, 2}};
  std::uint64_t seed = 200;
  for (const auto& s : shapes) {
    const auto rp = fixtures::random_problem(s.n, s.m, s.d, seed++);
    const auto cert = dlqr::stationary_candidate(rp.plant, rp.X);
    expect_separation(rp.plant, cert);
    EXPECT_TRUE(dlqr::is_observable_controller(cert.K_star)) << "seed " << seed - 1;
    for (const auto& [name, value] : cert.residuals.entries())
      EXPECT_LE(value, dlqr::kStationaryTolerance) << name << " seed " << seed - 1;
    EXPECT_LE(cert.optimal_transform_gap, dlqr::kStationaryTolerance);
    EXPECT_TRUE(cert.verified());
  }
}

// With fewer inputs than outputs, A - LC vanishes on the d-dimensional range
// of Sigma_hat C^T, so the controller-state cost Gramian has rank at most
// m + n - d < n. The candidate is still stationary, but its (C_K, A_K) is
// unobservable and every identity that needs P22^{-1} is undefined.
TEST(StationaryCandidate, FewerInputsThanOutputsGivesUnobservableStationaryPoint) {
  const Shape shapes[] = {{2, 1, 2}, {3, 1, 2}, {3, 1, 3}, {3, 2, 3}};
  std::uint64_t seed = 250;
  for (const auto& s : shapes) {
    const auto rp = fixtures::random_problem(s.n, s.m, s.d, seed++);
    const auto cert = dlqr::stationary_candidate(rp.plant, rp.X);
    expect_separation(rp.plant, cert);
    EXPECT_LE(cert.residuals.gradient_norm, dlqr::kStationaryTolerance);
    EXPECT_LE(cert.residuals.sigma_identity, dlqr::kStationaryTolerance);
    EXPECT_LE(cert.residuals.moment_identity, dlqr::kStationaryTolerance);

    const auto r = dlqr::evaluate(rp.plant, cert.K_star, rp.X);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(Matrix(r.P22()));
    EXPECT_LE(eig.eigenvalues().head(s.d - s.m).cwiseAbs().maxCoeff(),
              1e-10 * eig.eigenvalues().maxCoeff());
    EXPECT_FALSE(dlqr::is_observable_controller(cert.K_star));
    EXPECT_FALSE(cert.verified());
  }
}

TEST(StationaryCandidate, SingularX12) {
  try {
    dlqr::stationary_candidate(fixtures::example1(),
                               dlqr::SecondMoment(Matrix::Identity(2, 2)));
    FAIL();
  } catch (const dlqr::Error& e) {
    EXPECT_EQ(e.code(), dlqr::ErrorCode::SingularX12);
  }
}

TEST(StationaryCandidate, RequiresPositiveDefiniteMoment) {
  Matrix X(2, 2);
  X << 1, 1, 1, 1;
  try {
    dlqr::stationary_candidate(fixtures::example1(), dlqr::SecondMoment(X));
    FAIL();
  } catch (const dlqr::Error& e) {
    EXPECT_EQ(e.code(), dlqr::ErrorCode::AssumptionViolated);
  }
}

TEST(VerifyStationary, GenericControllerFailsGradientCheck) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto rp = fixtures::random_problem(2, 1, 1, 300 + seed);
    const auto k = dlqr::random_stabilizing_init(rp.plant, seed);
    EXPECT_GT(dlqr::verify_stationary(rp.plant, rp.X, k).gradient_norm, 1e-3);
  }
}

TEST(VerifyStationary, DoubledTransformBreaksMomentIdentity) {
  for (const auto& p : {fixtures::example1(), fixtures::example2()}) {
    const auto X = fixtures::example_moment();
    const auto cert = dlqr::stationary_candidate(p, X);
    const dlqr::Transform doubled(Matrix(2 * cert.T_star.T()));
    const auto k = dlqr::apply(cert.K_dagger, doubled);
    EXPECT_GT(dlqr::verify_stationary(p, X, k).moment_identity, 1e-2);
  }
}

TEST(VerifyStationary, GridSamplesDoNotBeatTheCandidate) {
  for (const auto& p : {fixtures::example1(), fixtures::example2()}) {
    const auto X = fixtures::example_moment();
    const auto cert = dlqr::stationary_candidate(p, X);
    for (int i = 0; i <= 20; ++i) {
      for (int j = 0; j <= 20; ++j) {
        for (int l = 0; l <= 20; l += 4) {
          const auto k = fixtures::scalar_controller(-1.5 + 0.15 * l, 0.4 * i, -0.5 + 0.05 * j);
          if (!dlqr::is_stabilizing(p, k)) continue;
          EXPECT_GE(dlqr::evaluate(p, k, X).J, cert.J - 1e-12);
        }
      }
    }
  }
}

TEST(SchurComplement, MatchesDefinition) {
  const auto rp = fixtures::random_problem(3, 1, 1, 5);
  const Matrix X12 = rp.X.X12();
  const Matrix expected = rp.X.X11() - X12 * rp.X.X22().inverse() * X12.transpose();
  EXPECT_LE((dlqr::schur_complement_x(rp.X) - expected).norm(), 1e-14);
}
