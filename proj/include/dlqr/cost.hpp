#pragma once

// Exact cost J(K) = Tr(P_K X) = Tr(blockdiag(Q, C_K^T R C_K) Sigma_K), where
//
//   P_K     = W_cl + A_cl^T P_K A_cl
//   Sigma_K = X    + A_cl Sigma_K A_cl^T.
//
// P_K and Sigma_K come from two independent Lyapunov solves so the two trace
// forms cross-check each other.

#include <algorithm>

#include "dlqr/matops.hpp"
#include "dlqr/model.hpp"

namespace dlqr {

template <typename Scalar>
struct BasicCostReport {
  using Mat = MatrixX<Scalar>;

  Mat P;          // value matrix
  Mat Sigma;      // accumulated state correlation
  Scalar J = 0;   // Tr(P X)
  Scalar J_dual = 0;  // Tr(W_cl Sigma)

  Eigen::Index n() const { return P.rows() / 2; }

  Mat P11() const { return P.topLeftCorner(n(), n()); }
  Mat P12() const { return P.topRightCorner(n(), n()); }
  Mat P22() const { return P.bottomRightCorner(n(), n()); }
  Mat S11() const { return Sigma.topLeftCorner(n(), n()); }
  Mat S12() const { return Sigma.topRightCorner(n(), n()); }
  Mat S22() const { return Sigma.bottomRightCorner(n(), n()); }

  /// |Tr(P X) - Tr(W Sigma)| / (1 + |J|)
  Scalar trace_gap() const { return std::abs(J - J_dual) / (1 + std::abs(J)); }
};

using CostReport = BasicCostReport<double>;

template <typename Scalar>
BasicCostReport<Scalar> evaluate(const BasicPlant<Scalar>& p,
                                 const BasicController<Scalar>& k,
                                 const BasicSecondMoment<Scalar>& X,
                                 const SolverConfig& cfg = {}) {
  require(X.n() == p.n(), ErrorCode::DimensionMismatch,
          "evaluate: second moment must be 2n x 2n");
  const auto cl = assemble(p, k);
  const Scalar rho = spectral_radius(cl.A_cl);
  if (!(rho < 1 - Scalar(cfg.stability_margin))) {
    fail(ErrorCode::NotStabilizing,
         "controller is not stabilizing (rho = " + std::to_string(double(rho)) +
             ")");
  }
  BasicCostReport<Scalar> r;
  r.P = solve_dlyap_dual(cl.A_cl, cl.W_cl, cfg);
  r.Sigma = solve_dlyap_primal(cl.A_cl, X.matrix(), cfg);
  r.J = r.P.cwiseProduct(X.matrix()).sum();
  r.J_dual = cl.W_cl.cwiseProduct(r.Sigma).sum();
  return r;
}

/// J(to) - J(from) without subtracting two large costs. With E = A_cl' - A_cl
/// the difference D = P' - P solves
///   D = A_cl'^T D A_cl' + E^T P A_cl + A_cl^T P E + E^T P E + (W' - W),
/// and the cost difference is Tr(D X).
template <typename Scalar>
Scalar cost_difference(const BasicPlant<Scalar>& p,
                       const BasicController<Scalar>& from,
                       const BasicController<Scalar>& to,
                       const BasicSecondMoment<Scalar>& X,
                       const MatrixX<Scalar>& P_from,
                       const SolverConfig& cfg = {}) {
  const auto n = p.n();
  const auto cl_from = assemble(p, from);
  const auto cl_to = assemble(p, to);
  require(spectral_radius(cl_to.A_cl) < 1 - Scalar(cfg.stability_margin),
          ErrorCode::NotStabilizing, "cost_difference: target not stabilizing");
  const MatrixX<Scalar> E = cl_to.A_cl - cl_from.A_cl;
  const MatrixX<Scalar> PA = P_from * cl_from.A_cl;
  MatrixX<Scalar> F = E.transpose() * PA + PA.transpose() * E +
                      E.transpose() * P_from * E;
  const MatrixX<Scalar> dC = to.C_K - from.C_K;
  const MatrixX<Scalar> RC = p.R() * from.C_K;
  F.bottomRightCorner(n, n) += dC.transpose() * RC + RC.transpose() * dC +
                               dC.transpose() * p.R() * dC;
  const MatrixX<Scalar> D = solve_dlyap_dual(cl_to.A_cl, symmetrize(F), cfg);
  return D.cwiseProduct(X.matrix()).sum();
}

/// Frobenius residuals of the six block-wise Lyapunov equations.
template <typename Scalar>
struct BasicBlockResiduals {
  Scalar rP11 = 0, rP12 = 0, rP22 = 0;
  Scalar rS11 = 0, rS12 = 0, rS22 = 0;

  Scalar max() const { return std::max({rP11, rP12, rP22, rS11, rS12, rS22}); }
};

using BlockResiduals = BasicBlockResiduals<double>;

/// Residual threshold 1e-9 (1 + ||P|| + ||Sigma||) used for block checks.
template <typename Scalar>
Scalar block_residual_tolerance(const BasicCostReport<Scalar>& r) {
  return Scalar(1e-9) * (1 + r.P.norm() + r.Sigma.norm());
}

/// Evaluates the partitioned Lyapunov equations for P and Sigma term by term,
/// independently of the 2n x 2n form used by evaluate().
template <typename Scalar>
BasicBlockResiduals<Scalar> block_lyapunov_residuals(
    const BasicPlant<Scalar>& p, const BasicController<Scalar>& k,
    const BasicCostReport<Scalar>& r, const BasicSecondMoment<Scalar>& X) {
  check_dimensions(p, k);
  const auto& A = p.A();
  const auto& B = p.B();
  const auto& C = p.C();
  const auto& Q = p.Q();
  const auto& R = p.R();
  const auto& AK = k.A_K;
  const auto& BK = k.B_K;
  const auto& CK = k.C_K;
  const MatrixX<Scalar> P11 = r.P11(), P12 = r.P12(), P22 = r.P22();
  const MatrixX<Scalar> S11 = r.S11(), S12 = r.S12(), S22 = r.S22();
  const MatrixX<Scalar> X11 = X.X11(), X12 = X.X12(), X22 = X.X22();
  const MatrixX<Scalar> At = A.transpose(), CtBKt = C.transpose() * BK.transpose();

  BasicBlockResiduals<Scalar> out;
  out.rP11 = (P11 - (Q + At * P11 * A + CtBKt * P12.transpose() * A +
                     At * P12 * BK * C + CtBKt * P22 * BK * C))
                 .norm();
  out.rP12 = (P12 - (At * P11 * B * CK + CtBKt * P12.transpose() * B * CK +
                     At * P12 * AK + CtBKt * P22 * AK))
                 .norm();
  out.rP22 = (P22 - (CK.transpose() * R * CK +
                     AK.transpose() * P12.transpose() * B * CK +
                     CK.transpose() * B.transpose() * P12 * AK +
                     CK.transpose() * B.transpose() * P11 * B * CK +
                     AK.transpose() * P22 * AK))
                 .norm();
  const MatrixX<Scalar> BCK = B * CK;
  out.rS11 = (S11 - (X11 + A * S11 * At + BCK * S12.transpose() * At +
                     A * S12 * BCK.transpose() + BCK * S22 * BCK.transpose()))
                 .norm();
  out.rS12 = (S12 - (X12 + A * S11 * CtBKt + BCK * S12.transpose() * CtBKt +
                     A * S12 * AK.transpose() + BCK * S22 * AK.transpose()))
                 .norm();
  out.rS22 = (S22 - (X22 + BK * C * S11 * CtBKt + AK * S12.transpose() * CtBKt +
                     BK * C * S12 * AK.transpose() + AK * S22 * AK.transpose()))
                 .norm();
  return out;
}

}  // namespace dlqr
