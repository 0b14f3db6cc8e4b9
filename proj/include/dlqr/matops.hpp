#pragma once

// Dense kernels shared by every other module: spectral radius, discrete
// Lyapunov and Riccati solvers, Kalman rank tests.
//
// All routines are templated on the scalar type of their Eigen arguments and
// return dynamically sized matrices of the same scalar.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "dlqr/error.hpp"

namespace dlqr {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

struct SolverConfig {
  double tol = 1e-12;
  int max_iter = 100000;
  // Solvers require rho < 1 - stability_margin.
  double stability_margin = 1e-9;

  void validate() const {
    require(tol > 0, ErrorCode::InvalidInput, "SolverConfig.tol must be > 0");
    require(max_iter >= 1, ErrorCode::InvalidInput,
            "SolverConfig.max_iter must be >= 1");
    require(stability_margin >= 0 && stability_margin < 1,
            ErrorCode::InvalidInput,
            "SolverConfig.stability_margin must lie in [0, 1)");
  }
};

// Closed-loop dimensions up to this size are solved by Kronecker
// vectorization; larger ones use the doubling iteration.
inline constexpr int kKroneckerMaxDim = 12;

// Relative threshold for numerical rank decisions: sigma > kRankTol * sigma_max.
inline constexpr double kRankTol = 1e-9;

namespace detail {

template <typename Derived>
void require_square(const Eigen::MatrixBase<Derived>& M, const char* name) {
  if (M.rows() != M.cols()) {
    fail(ErrorCode::NonSquare, std::string(name) + " is " +
                                   std::to_string(M.rows()) + "x" +
                                   std::to_string(M.cols()));
  }
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& M) {
  return M.allFinite();
}

}  // namespace detail

template <typename Derived>
typename Derived::Scalar spectral_radius(const Eigen::MatrixBase<Derived>& M) {
  using Scalar = typename Derived::Scalar;
  detail::require_square(M, "spectral_radius argument");
  require(M.allFinite(), ErrorCode::InvalidInput,
          "spectral_radius argument has non-finite entries");
  if (M.rows() == 0) return Scalar(0);
  if (M.rows() == 1) return std::abs(M(0, 0));
  Eigen::EigenSolver<MatrixX<Scalar>> es(M.eval(), /*computeEigenvectors=*/false);
  require(es.info() == Eigen::Success, ErrorCode::SolverDiverged,
          "eigenvalue iteration did not converge");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

template <typename Derived>
MatrixX<typename Derived::Scalar> symmetrize(const Eigen::MatrixBase<Derived>& M) {
  return (M + M.transpose()) / typename Derived::Scalar(2);
}

template <typename Derived>
typename Derived::Scalar min_eigenvalue_symmetric(
    const Eigen::MatrixBase<Derived>& M) {
  using Scalar = typename Derived::Scalar;
  if (M.rows() == 0) return Scalar(0);
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(symmetrize(M),
                                                    Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

template <typename Derived>
bool is_symmetric(const Eigen::MatrixBase<Derived>& M, double rtol = 1e-10) {
  if (M.rows() != M.cols()) return false;
  const auto scale = std::max<typename Derived::Scalar>(1, M.norm());
  return (M - M.transpose()).norm() <= rtol * scale;
}

/// PSD up to the symmetric-eigensolver noise floor: lambda_min >= -1e-9 ||M||_F.
template <typename Derived>
bool is_psd(const Eigen::MatrixBase<Derived>& M) {
  if (!is_symmetric(M)) return false;
  return min_eigenvalue_symmetric(M) >= -1e-9 * M.norm();
}

template <typename Derived>
bool is_positive_definite(const Eigen::MatrixBase<Derived>& M) {
  if (!is_symmetric(M) || M.rows() == 0) return false;
  Eigen::LLT<MatrixX<typename Derived::Scalar>> llt(symmetrize(M));
  return llt.info() == Eigen::Success &&
         min_eigenvalue_symmetric(M) > 1e-12 * M.norm();
}

template <typename Derived>
int numerical_rank(const Eigen::MatrixBase<Derived>& M) {
  if (M.size() == 0) return 0;
  Eigen::JacobiSVD<MatrixX<typename Derived::Scalar>> svd(M.eval());
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0) return 0;
  const auto threshold = kRankTol * sv(0);
  return static_cast<int>((sv.array() > threshold).count());
}

/// Ratio sigma_min / sigma_max; zero for a zero matrix.
template <typename Derived>
typename Derived::Scalar inverse_condition(const Eigen::MatrixBase<Derived>& M) {
  using Scalar = typename Derived::Scalar;
  if (M.size() == 0) return Scalar(0);
  Eigen::JacobiSVD<MatrixX<Scalar>> svd(M.eval());
  const auto& sv = svd.singularValues();
  if (sv(0) == 0) return Scalar(0);
  return sv(sv.size() - 1) / sv(0);
}

// [B, AB, ..., A^{n-1}B]
template <typename DA, typename DB>
MatrixX<typename DA::Scalar> controllability_matrix(
    const Eigen::MatrixBase<DA>& A, const Eigen::MatrixBase<DB>& B) {
  const Eigen::Index n = A.rows();
  MatrixX<typename DA::Scalar> K(n, n * B.cols());
  MatrixX<typename DA::Scalar> block = B;
  for (Eigen::Index k = 0; k < n; ++k) {
    K.middleCols(k * B.cols(), B.cols()) = block;
    block = A * block;
  }
  return K;
}

template <typename DA, typename DB>
bool is_controllable(const Eigen::MatrixBase<DA>& A,
                     const Eigen::MatrixBase<DB>& B) {
  detail::require_square(A, "A");
  require(B.rows() == A.rows(), ErrorCode::DimensionMismatch,
          "controllability test: B rows must equal A size");
  if (A.rows() == 0) return true;
  return numerical_rank(controllability_matrix(A, B)) == A.rows();
}

/// Kalman observability of the pair (C, A).
template <typename DC, typename DA>
bool is_observable(const Eigen::MatrixBase<DC>& C,
                   const Eigen::MatrixBase<DA>& A) {
  detail::require_square(A, "A");
  require(C.cols() == A.rows(), ErrorCode::DimensionMismatch,
          "observability test: C cols must equal A size");
  if (A.rows() == 0) return true;
  return numerical_rank(
             controllability_matrix(A.transpose(), C.transpose())) == A.rows();
}

struct RankReport {
  bool controllable = false;
  bool observable_CA = false;
  bool observable_QA = false;

  bool all() const { return controllable && observable_CA && observable_QA; }
};

/// Assumption-1 style rank verdicts. Observability of (Q^{1/2}, A) is tested
/// on (Q, A), which has the same unobservable subspace.
template <typename DA, typename DB, typename DC, typename DQ>
RankReport rank_tests(const Eigen::MatrixBase<DA>& A,
                      const Eigen::MatrixBase<DB>& B,
                      const Eigen::MatrixBase<DC>& C,
                      const Eigen::MatrixBase<DQ>& Q) {
  return {is_controllable(A, B), is_observable(C, A), is_observable(Q, A)};
}

// ---------------------------------------------------------------------------
// Discrete Lyapunov equations.
//
//   dual form:   P = W + A^T P A
//   primal form: S = W + A S A^T   (the dual form on A^T)
// ---------------------------------------------------------------------------

/// Relative residual ||P - W - A^T P A||_F / (1 + ||P||_F).
template <typename DA, typename DW, typename DP>
typename DA::Scalar dlyap_dual_residual(const Eigen::MatrixBase<DA>& A,
                                        const Eigen::MatrixBase<DW>& W,
                                        const Eigen::MatrixBase<DP>& P) {
  return (P - W - A.transpose() * P * A).norm() / (1 + P.norm());
}

/// Direct solve of (I - A^T (x) A^T) vec(P) = vec(W) with one step of
/// iterative refinement. No stability check; singular systems throw.
template <typename DA, typename DW>
MatrixX<typename DA::Scalar> solve_dlyap_kronecker(
    const Eigen::MatrixBase<DA>& A, const Eigen::MatrixBase<DW>& W) {
  using Scalar = typename DA::Scalar;
  detail::require_square(A, "A");
  detail::require_square(W, "W");
  require(A.rows() == W.rows(), ErrorCode::DimensionMismatch,
          "Lyapunov: A and W sizes differ");
  const Eigen::Index n = A.rows();
  if (n == 0) return MatrixX<Scalar>(0, 0);

  // vec(A^T P A)(i + n j) = sum_{k,l} A(k,i) P(k,l) A(l,j)
  const Eigen::Index nn = n * n;
  MatrixX<Scalar> M = MatrixX<Scalar>::Identity(nn, nn);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index l = 0; l < n; ++l)
        for (Eigen::Index k = 0; k < n; ++k)
          M(i + n * j, k + n * l) -= A(k, i) * A(l, j);

  const MatrixX<Scalar> Wm = W;
  const VectorX<Scalar> w = Eigen::Map<const VectorX<Scalar>>(Wm.data(), nn);
  Eigen::PartialPivLU<MatrixX<Scalar>> lu(M);
  VectorX<Scalar> p = lu.solve(w);
  p += lu.solve(w - M * p);
  require(p.allFinite(), ErrorCode::SolverDiverged,
          "Kronecker Lyapunov system is singular");
  MatrixX<Scalar> P = Eigen::Map<const MatrixX<Scalar>>(p.data(), n, n);
  return symmetrize(P);
}

/// Sums the series P = sum_k (A^T)^k W A^k by squaring:
/// S_{j+1} = S_j + A_j^T S_j A_j, A_{j+1} = A_j^2.
template <typename DA, typename DW>
MatrixX<typename DA::Scalar> solve_dlyap_doubling(
    const Eigen::MatrixBase<DA>& A, const Eigen::MatrixBase<DW>& W,
    const SolverConfig& cfg = {}) {
  using Scalar = typename DA::Scalar;
  detail::require_square(A, "A");
  require(A.rows() == W.rows() && W.rows() == W.cols(),
          ErrorCode::DimensionMismatch, "Lyapunov: A and W sizes differ");
  MatrixX<Scalar> S = W;
  MatrixX<Scalar> Ak = A;
  // 2^64 terms of the series is far beyond anything a stable A needs.
  const int max_doublings = std::min(cfg.max_iter, 64);
  for (int it = 0; it < max_doublings; ++it) {
    MatrixX<Scalar> increment = Ak.transpose() * S * Ak;
    S += increment;
    if (!S.allFinite()) break;
    if (increment.norm() <= Scalar(1e-3) * Scalar(cfg.tol) * (1 + S.norm()))
      return symmetrize(S);
    Ak = (Ak * Ak).eval();
  }
  fail(ErrorCode::SolverDiverged, "Lyapunov doubling did not converge");
}

/// Solves P = W + A^T P A for stable A (rho(A) < 1 - margin).
template <typename DA, typename DW>
MatrixX<typename DA::Scalar> solve_dlyap_dual(const Eigen::MatrixBase<DA>& A,
                                              const Eigen::MatrixBase<DW>& W,
                                              const SolverConfig& cfg = {}) {
  using Scalar = typename DA::Scalar;
  cfg.validate();
  detail::require_square(A, "A");
  detail::require_square(W, "W");
  require(A.rows() == W.rows(), ErrorCode::DimensionMismatch,
          "Lyapunov: A and W sizes differ");
  require(A.allFinite() && W.allFinite(), ErrorCode::InvalidInput,
          "Lyapunov: non-finite input");
  const Scalar rho = spectral_radius(A);
  if (!(rho < 1 - Scalar(cfg.stability_margin))) {
    fail(ErrorCode::Unstable,
         "Lyapunov: spectral radius " + std::to_string(double(rho)) +
             " is not below 1 - margin");
  }
  MatrixX<Scalar> P = A.rows() <= kKroneckerMaxDim
                          ? solve_dlyap_kronecker(A, W)
                          : solve_dlyap_doubling(A, W, cfg);
  const Scalar residual = dlyap_dual_residual(A, W, P);
  if (!(residual <= Scalar(cfg.tol))) {
    fail(ErrorCode::SolverDiverged,
         "Lyapunov residual " + std::to_string(double(residual)) +
             " exceeds tolerance");
  }
  return P;
}

/// Solves S = W + A S A^T for stable A.
template <typename DA, typename DW>
MatrixX<typename DA::Scalar> solve_dlyap_primal(const Eigen::MatrixBase<DA>& A,
                                                const Eigen::MatrixBase<DW>& W,
                                                const SolverConfig& cfg = {}) {
  return solve_dlyap_dual(A.transpose(), W, cfg);
}

// ---------------------------------------------------------------------------
// Discrete algebraic Riccati equations, by fixed-point iteration.
// ---------------------------------------------------------------------------

/// Gain (R + B^T P B)^{-1} B^T P A of the control Riccati equation.
template <typename Scalar>
MatrixX<Scalar> dare_control_gain(const MatrixX<Scalar>& A,
                                  const MatrixX<Scalar>& B,
                                  const MatrixX<Scalar>& R,
                                  const MatrixX<Scalar>& P) {
  const MatrixX<Scalar> G = symmetrize(MatrixX<Scalar>(R + B.transpose() * P * B));
  Eigen::FullPivLU<MatrixX<Scalar>> lu(G);
  if (!lu.isInvertible() || inverse_condition(G) < Scalar(1e-14)) {
    fail(ErrorCode::SingularInnovation, "R + B^T P B is numerically singular");
  }
  return lu.solve(MatrixX<Scalar>(B.transpose() * P * A));
}

/// Gain A S C^T (C S C^T)^{-1} of the filter Riccati equation.
template <typename Scalar>
MatrixX<Scalar> dare_filter_gain(const MatrixX<Scalar>& A,
                                 const MatrixX<Scalar>& C,
                                 const MatrixX<Scalar>& S) {
  const MatrixX<Scalar> G = symmetrize(MatrixX<Scalar>(C * S * C.transpose()));
  Eigen::FullPivLU<MatrixX<Scalar>> lu(G);
  if (!lu.isInvertible() || inverse_condition(G) < Scalar(1e-14)) {
    fail(ErrorCode::SingularInnovation, "C S C^T is numerically singular");
  }
  // (A S C^T) G^{-1} = (G^{-1} C S A^T)^T since G is symmetric.
  return lu.solve(MatrixX<Scalar>(C * S * A.transpose())).transpose();
}

template <typename Scalar>
MatrixX<Scalar> dare_control_map(const MatrixX<Scalar>& A,
                                 const MatrixX<Scalar>& B,
                                 const MatrixX<Scalar>& Q,
                                 const MatrixX<Scalar>& R,
                                 const MatrixX<Scalar>& P) {
  const MatrixX<Scalar> K = dare_control_gain(A, B, R, P);
  return symmetrize(MatrixX<Scalar>(Q + A.transpose() * P * A -
                                    A.transpose() * P * B * K));
}

template <typename Scalar>
MatrixX<Scalar> dare_filter_map(const MatrixX<Scalar>& A,
                                const MatrixX<Scalar>& C,
                                const MatrixX<Scalar>& W,
                                const MatrixX<Scalar>& S) {
  const MatrixX<Scalar> L = dare_filter_gain(A, C, S);
  return symmetrize(MatrixX<Scalar>(W + A * S * A.transpose() -
                                    L * C * S * A.transpose()));
}

/// ||Ric(P) - P||_F / (1 + ||P||_F) for the control equation.
template <typename Scalar>
Scalar dare_control_residual(const MatrixX<Scalar>& A, const MatrixX<Scalar>& B,
                             const MatrixX<Scalar>& Q, const MatrixX<Scalar>& R,
                             const MatrixX<Scalar>& P) {
  return (dare_control_map(A, B, Q, R, P) - P).norm() / (1 + P.norm());
}

template <typename Scalar>
Scalar dare_filter_residual(const MatrixX<Scalar>& A, const MatrixX<Scalar>& C,
                            const MatrixX<Scalar>& W, const MatrixX<Scalar>& S) {
  return (dare_filter_map(A, C, W, S) - S).norm() / (1 + S.norm());
}

namespace detail {

template <typename Scalar, typename Map>
MatrixX<Scalar> riccati_fixed_point(const MatrixX<Scalar>& start, Map&& step,
                                    const SolverConfig& cfg, const char* what) {
  MatrixX<Scalar> X = start;
  for (int it = 0; it < cfg.max_iter; ++it) {
    MatrixX<Scalar> next = step(X);
    if (!next.allFinite()) break;
    const Scalar change = (next - X).norm();
    X = std::move(next);
    if (change <= Scalar(cfg.tol) * (1 + X.norm())) return X;
  }
  fail(ErrorCode::SolverDiverged,
       std::string(what) + " Riccati iteration did not converge");
}

// Newton (Hewer) refinement: each step solves the Lyapunov equation of the
// closed loop under the current gain. Steps are kept while the residual drops.
template <typename Scalar, typename Step, typename Residual>
MatrixX<Scalar> newton_polish(MatrixX<Scalar> X, Step&& step, Residual&& residual,
                              int max_steps = 4) {
  Scalar r = residual(X);
  for (int it = 0; it < max_steps && r > 0; ++it) {
    MatrixX<Scalar> next;
    try {
      next = step(X);
    } catch (const Error&) {
      break;
    }
    const Scalar rn = residual(next);
    if (!(rn < r)) break;
    X = std::move(next);
    r = rn;
  }
  return X;
}

}  // namespace detail

/// Stabilizing solution of P = Q + A^T P A - A^T P B (R + B^T P B)^{-1} B^T P A,
/// iterated from P0 = Q. R may be singular as long as R + B^T P B is not.
template <typename DA, typename DB, typename DQ, typename DR>
MatrixX<typename DA::Scalar> solve_dare_control(const Eigen::MatrixBase<DA>& A_in,
                                                const Eigen::MatrixBase<DB>& B_in,
                                                const Eigen::MatrixBase<DQ>& Q_in,
                                                const Eigen::MatrixBase<DR>& R_in,
                                                const SolverConfig& cfg = {}) {
  using Scalar = typename DA::Scalar;
  cfg.validate();
  const MatrixX<Scalar> A = A_in, B = B_in, Q = Q_in, R = R_in;
  detail::require_square(A, "A");
  require(B.rows() == A.rows() && Q.rows() == A.rows() && Q.cols() == A.rows() &&
              R.rows() == B.cols() && R.cols() == B.cols(),
          ErrorCode::DimensionMismatch, "control DARE: inconsistent sizes");
  require(is_psd(Q) && is_psd(R), ErrorCode::InvalidInput,
          "control DARE: Q and R must be symmetric PSD");
  require(is_controllable(A, B), ErrorCode::AssumptionViolated,
          "control DARE: (A, B) is not controllable");
  require(is_observable(Q, A), ErrorCode::AssumptionViolated,
          "control DARE: (Q^{1/2}, A) is not observable");

  MatrixX<Scalar> P = detail::riccati_fixed_point<Scalar>(
      Q, [&](const MatrixX<Scalar>& X) { return dare_control_map(A, B, Q, R, X); },
      cfg, "control");
  // The fixed point converges linearly at rate rho(A - BK)^2 and stops on the
  // step size, which leaves an error of order tol / (1 - rate).
  P = detail::newton_polish<Scalar>(
      std::move(P),
      [&](const MatrixX<Scalar>& X) {
        const MatrixX<Scalar> Kx = dare_control_gain(A, B, R, X);
        return solve_dlyap_dual(MatrixX<Scalar>(A - B * Kx),
                                MatrixX<Scalar>(Q + Kx.transpose() * R * Kx), cfg);
      },
      [&](const MatrixX<Scalar>& X) { return dare_control_residual(A, B, Q, R, X); });
  const MatrixX<Scalar> K = dare_control_gain(A, B, R, P);
  require(spectral_radius(MatrixX<Scalar>(A - B * K)) < 1,
          ErrorCode::SolverDiverged, "control DARE: A - BK is not stable");
  require(dare_control_residual(A, B, Q, R, P) <= Scalar(10 * cfg.tol),
          ErrorCode::SolverDiverged, "control DARE: residual above tolerance");
  return P;
}

/// Stabilizing solution of S = W + A S A^T - A S C^T (C S C^T)^{-1} C S A^T,
/// iterated from S0 = W.
template <typename DA, typename DC, typename DW>
MatrixX<typename DA::Scalar> solve_dare_filter(const Eigen::MatrixBase<DA>& A_in,
                                               const Eigen::MatrixBase<DC>& C_in,
                                               const Eigen::MatrixBase<DW>& W_in,
                                               const SolverConfig& cfg = {}) {
  using Scalar = typename DA::Scalar;
  cfg.validate();
  const MatrixX<Scalar> A = A_in, C = C_in, W = W_in;
  detail::require_square(A, "A");
  require(C.cols() == A.rows() && W.rows() == A.rows() && W.cols() == A.rows(),
          ErrorCode::DimensionMismatch, "filter DARE: inconsistent sizes");
  require(is_psd(W), ErrorCode::InvalidInput,
          "filter DARE: W must be symmetric PSD");
  require(is_observable(C, A), ErrorCode::AssumptionViolated,
          "filter DARE: (C, A) is not observable");

  MatrixX<Scalar> S = detail::riccati_fixed_point<Scalar>(
      W, [&](const MatrixX<Scalar>& X) { return dare_filter_map(A, C, W, X); },
      cfg, "filter");
  S = detail::newton_polish<Scalar>(
      std::move(S),
      [&](const MatrixX<Scalar>& X) {
        const MatrixX<Scalar> Lx = dare_filter_gain(A, C, X);
        return solve_dlyap_primal(MatrixX<Scalar>(A - Lx * C), W, cfg);
      },
      [&](const MatrixX<Scalar>& X) { return dare_filter_residual(A, C, W, X); });
  const MatrixX<Scalar> L = dare_filter_gain(A, C, S);
  require(spectral_radius(MatrixX<Scalar>(A - L * C)) < 1,
          ErrorCode::SolverDiverged, "filter DARE: A - LC is not stable");
  require(dare_filter_residual(A, C, W, S) <= Scalar(10 * cfg.tol),
          ErrorCode::SolverDiverged, "filter DARE: residual above tolerance");
  return S;
}

}  // namespace dlqr
