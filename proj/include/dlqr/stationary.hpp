#pragma once

// Closed-form observable stationary point
//
//   K* = T_{T*}(K^dagger),  K^dagger = (A - B K - L C, L, -K),  T* = X22 X12^{-1},
//
// where K is the state-feedback LQR gain from the control Riccati equation and
// L the observer gain from the filter Riccati equation driven by the Schur
// complement Delta_X = X11 - X12 X22^{-1} X12^T.

#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "dlqr/gradient.hpp"
#include "dlqr/similarity.hpp"

namespace dlqr {

inline constexpr double kStationaryTolerance = 1e-8;

/// Residuals of the identities that hold at an observable stationary point.
/// All are absolute Frobenius norms.
template <typename Scalar>
struct BasicStationaryResiduals {
  Scalar gradient_norm = 0;    // ||grad J||
  Scalar sigma_identity = 0;   // ||P12^T S12 + P22 S22||
  Scalar moment_identity = 0;  // ||P12^T X12 + P22 X22||
  Scalar foc_C = 0;            // ||C_K + K S12 S22^{-1}||
  Scalar foc_B = 0;            // ||B_K + P22^{-1} P12^T L||
  Scalar foc_A = 0;            // ||A_K + P22^{-1} P12^T (A - LC - BK) S12 S22^{-1}||
  Scalar dagger_identity = 0;  // ||-P22^{-1} P12^T - I|| at K^dagger
  Scalar riccati_control = 0;  // relative residual of the control DARE at P-hat
  Scalar riccati_filter = 0;   // relative residual of the filter DARE at Sigma-hat

  std::vector<std::pair<std::string, Scalar>> entries() const {
    return {{"gradient_norm", gradient_norm},
            {"sigma_identity", sigma_identity},
            {"moment_identity", moment_identity},
            {"foc_C", foc_C},
            {"foc_B", foc_B},
            {"foc_A", foc_A},
            {"dagger_identity", dagger_identity},
            {"riccati_control", riccati_control},
            {"riccati_filter", riccati_filter}};
  }

  Scalar max() const {
    Scalar m = 0;
    for (const auto& [name, v] : entries()) {
      if (!(v <= m)) m = v;  // propagates NaN/inf
    }
    return m;
  }
};

using StationaryResiduals = BasicStationaryResiduals<double>;

/// X11 - X12 X22^{-1} X12^T
template <typename Scalar>
MatrixX<Scalar> schur_complement_x(const BasicSecondMoment<Scalar>& X) {
  const MatrixX<Scalar> X12 = X.X12();
  return symmetrize(MatrixX<Scalar>(
      X.X11() - X12 * X.X22().ldlt().solve(MatrixX<Scalar>(X12.transpose()))));
}

namespace detail {

template <typename Scalar>
MatrixX<Scalar> solve_or_throw(const MatrixX<Scalar>& M, const MatrixX<Scalar>& rhs,
                               const char* what) {
  Eigen::FullPivLU<MatrixX<Scalar>> lu(M);
  if (!lu.isInvertible() || inverse_condition(M) < Scalar(1e-14)) {
    fail(ErrorCode::SolverDiverged, std::string(what) + " is singular");
  }
  return lu.solve(rhs);
}

}  // namespace detail

/// Evaluates every stationarity identity at `candidate`. Identities whose
/// inverses do not exist at the candidate report +inf.
template <typename Scalar>
BasicStationaryResiduals<Scalar> verify_stationary(
    const BasicPlant<Scalar>& p, const BasicSecondMoment<Scalar>& X,
    const BasicController<Scalar>& candidate, const SolverConfig& cfg = {}) {
  const auto r = evaluate(p, candidate, X, cfg);
  const auto& A = p.A();
  const auto& B = p.B();
  const auto& C = p.C();
  const auto& R = p.R();
  const MatrixX<Scalar> P11 = r.P11(), P12 = r.P12(), P22 = r.P22();
  const MatrixX<Scalar> S11 = r.S11(), S12 = r.S12(), S22 = r.S22();
  const Scalar inf = std::numeric_limits<Scalar>::infinity();

  BasicStationaryResiduals<Scalar> out;
  out.gradient_norm = gradient_from_blocks(p, candidate, r.P, r.Sigma).norm;
  out.sigma_identity = (P12.transpose() * S12 + P22 * S22).norm();
  out.moment_identity = (P12.transpose() * X.X12() + P22 * X.X22()).norm();

  out.foc_A = out.foc_B = out.foc_C = inf;
  out.dagger_identity = out.riccati_control = out.riccati_filter = inf;
  try {
    // S12 S22^{-1} and P22^{-1} P12^T
    const MatrixX<Scalar> S12_S22inv =
        detail::solve_or_throw<Scalar>(S22, S12.transpose(), "Sigma22").transpose();
    const MatrixX<Scalar> P22inv_P12t =
        detail::solve_or_throw<Scalar>(P22, P12.transpose(), "P22");
    const MatrixX<Scalar> P_hat = symmetrize(MatrixX<Scalar>(P11 - P12 * P22inv_P12t));
    const MatrixX<Scalar> S_hat =
        symmetrize(MatrixX<Scalar>(S11 - S12_S22inv * S12.transpose()));
    const MatrixX<Scalar> K = dare_control_gain<Scalar>(A, B, R, P_hat);
    const MatrixX<Scalar> L = dare_filter_gain<Scalar>(A, C, S_hat);

    out.foc_C = (candidate.C_K + K * S12_S22inv).norm();
    out.foc_B = (candidate.B_K + P22inv_P12t * L).norm();
    out.foc_A =
        (candidate.A_K + P22inv_P12t * (A - L * C - B * K) * S12_S22inv).norm();
    out.riccati_control = dare_control_residual<Scalar>(A, B, p.Q(), R, P_hat);
    out.riccati_filter =
        dare_filter_residual<Scalar>(A, C, schur_complement_x(X), S_hat);

    // K^dagger = T_{T^{-1}}(K*) with T = -P22^{-1} P12^T.
    const BasicTransform<Scalar> t(MatrixX<Scalar>(-P22inv_P12t));
    const auto dagger = apply(candidate, BasicTransform<Scalar>(t.T_inv()));
    const auto rd = evaluate(p, dagger, X, cfg);
    const MatrixX<Scalar> Td =
        -detail::solve_or_throw<Scalar>(rd.P22(), rd.P12().transpose(), "P22");
    out.dagger_identity = (Td - MatrixX<Scalar>::Identity(p.n(), p.n())).norm();
  } catch (const Error&) {
    // Leave the remaining identities at +inf: they are undefined here.
  }
  return out;
}

template <typename Scalar>
struct BasicStationaryCertificate {
  BasicController<Scalar> K_star;
  BasicController<Scalar> K_dagger;
  BasicTransform<Scalar> T_star;
  MatrixX<Scalar> K_gain;     // m x n state-feedback gain
  MatrixX<Scalar> L_gain;     // n x d observer gain
  MatrixX<Scalar> P_hat;      // control Riccati solution
  MatrixX<Scalar> Sigma_hat;  // filter Riccati solution
  MatrixX<Scalar> Delta_X;    // X11 - X12 X22^{-1} X12^T
  Scalar J = 0;               // J(K_star)
  BasicStationaryResiduals<Scalar> residuals;
  // ||T* - optimal_transform(K^dagger)||: T* is the optimal transform of K^dagger.
  Scalar optimal_transform_gap = 0;

  bool verified(double tol = kStationaryTolerance) const {
    return residuals.max() <= Scalar(tol) && optimal_transform_gap <= Scalar(tol);
  }
};

using StationaryCertificate = BasicStationaryCertificate<double>;

/// Builds the observable stationary candidate and certifies it.
/// Throws SingularX12 when X12 is not invertible (no candidate of this form).
template <typename Scalar>
BasicStationaryCertificate<Scalar> stationary_candidate(
    const BasicPlant<Scalar>& p, const BasicSecondMoment<Scalar>& X,
    const SolverConfig& cfg = {}) {
  require(X.n() == p.n(), ErrorCode::DimensionMismatch,
          "stationary_candidate: second moment must be 2n x 2n");
  require(X.positive_definite(), ErrorCode::AssumptionViolated,
          "stationary_candidate: X must be positive definite");
  const MatrixX<Scalar> X12 = X.X12();
  if (inverse_condition(X12) < Scalar(kSingularityThreshold)) {
    fail(ErrorCode::SingularX12,
         "X12 is singular: no observable stationary point of closed form exists");
  }
  const auto& A = p.A();
  const auto& B = p.B();
  const auto& C = p.C();

  MatrixX<Scalar> Delta = schur_complement_x(X);
  MatrixX<Scalar> P_hat = solve_dare_control(A, B, p.Q(), p.R(), cfg);
  MatrixX<Scalar> S_hat = solve_dare_filter(A, C, Delta, cfg);
  MatrixX<Scalar> K = dare_control_gain<Scalar>(A, B, p.R(), P_hat);
  MatrixX<Scalar> L = dare_filter_gain<Scalar>(A, C, S_hat);

  auto dagger = observer_based(p, K, L);
  BasicTransform<Scalar> T_star(MatrixX<Scalar>(X.X22() * X12.fullPivLu().inverse()));
  auto star = apply(dagger, T_star);

  Scalar gap = std::numeric_limits<Scalar>::infinity();
  try {
    gap = (optimal_transform(p, dagger, X, cfg).transform.T() - T_star.T()).norm();
  } catch (const Error&) {
  }

  BasicStationaryCertificate<Scalar> cert{
      std::move(star), std::move(dagger), std::move(T_star), std::move(K),
      std::move(L),    std::move(P_hat),  std::move(S_hat),  std::move(Delta),
      0,               {},                gap};
  cert.J = evaluate(p, cert.K_star, X, cfg).J;
  cert.residuals = verify_stationary(p, X, cert.K_star, cfg);
  return cert;
}

}  // namespace dlqr
