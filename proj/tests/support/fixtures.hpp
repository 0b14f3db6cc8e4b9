#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "dlqr/dlqr.hpp"

namespace fixtures {

using dlqr::Controller;
using dlqr::Matrix;
using dlqr::Plant;
using dlqr::SecondMoment;

inline Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

/// A in {1.1, 0.9}, B = C = 1, Q = 5, R = 1.
inline Plant scalar_plant(double a) {
  return Plant(scalar(a), scalar(1), scalar(1), scalar(5), scalar(1));
}

inline Plant example1() { return scalar_plant(1.1); }
inline Plant example2() { return scalar_plant(0.9); }

inline SecondMoment example_moment() {
  Matrix X(2, 2);
  X << 1, 0.25, 0.25, 1;
  return SecondMoment(X);
}

inline Controller scalar_controller(double a_k, double b_k, double c_k) {
  return {scalar(a_k), scalar(b_k), scalar(c_k)};
}

/// The orbit representative (-0.944, 1.1, -0.944) on the Example-1 plant.
inline Controller example1_controller() { return scalar_controller(-0.944, 1.1, -0.944); }

inline std::string data_path(const std::string& name) {
  return std::string(DLQR_TEST_DATA_DIR) + "/" + name;
}

inline Matrix uniform(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                      double scale = 1) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix M(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) M(i, j) = u(rng);
  return M;
}

struct RandomProblem {
  Plant plant;
  SecondMoment X;
};

/// Seeded plant with spectral radius of A in [0.5, 1.2], identity-scale
/// weights and a second moment X = [[I, X12], [X12^T, I]] whose X12 =
/// 0.4 I + small noise is well conditioned (so X is positive definite).
inline RandomProblem random_problem(Eigen::Index n, Eigen::Index m, Eigen::Index d,
                                    std::uint64_t seed) {
  // C must have full row rank, so d <= n.
  dlqr::require(d <= n, dlqr::ErrorCode::InvalidInput, "random_problem: d must be <= n");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> radius(0.5, 1.2);
  for (;;) {
    Matrix A = uniform(rng, n, n);
    const double rho = dlqr::spectral_radius(A);
    if (rho < 1e-3) continue;
    A *= radius(rng) / rho;
    const Matrix B = uniform(rng, n, m);
    const Matrix C = uniform(rng, d, n);
    const Matrix G = uniform(rng, n, n, 0.3);
    const Matrix Q = Matrix::Identity(n, n) + G * G.transpose();
    const Matrix R = Matrix::Identity(m, m);
    if (!dlqr::rank_tests(A, B, C, Q).all() || dlqr::numerical_rank(C) != d) continue;
    if (dlqr::inverse_condition(dlqr::controllability_matrix(A, B)) < 1e-2) continue;
    if (dlqr::inverse_condition(dlqr::controllability_matrix(
            Matrix(A.transpose()), Matrix(C.transpose()))) < 1e-2)
      continue;

    Matrix X = Matrix::Identity(2 * n, 2 * n);
    const Matrix X12 = 0.4 * Matrix::Identity(n, n) + uniform(rng, n, n, 0.1);
    X.topRightCorner(n, n) = X12;
    X.bottomLeftCorner(n, n) = X12.transpose();
    return {Plant(A, B, C, Q, R), SecondMoment(X)};
  }
}

/// Random invertible T with singular values bounded away from zero.
inline dlqr::Transform random_transform(std::mt19937_64& rng, Eigen::Index n) {
  for (;;) {
    const Matrix T = Matrix::Identity(n, n) + uniform(rng, n, n, 0.7);
    if (dlqr::inverse_condition(T) > 0.05) return dlqr::Transform(T);
  }
}

}  // namespace fixtures
