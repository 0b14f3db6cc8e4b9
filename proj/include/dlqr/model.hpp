#pragma once

// Plant, full-order dynamic controller, initial second moment and the
// closed-loop assembly
//
//   [x_{t+1}; xi_{t+1}] = [A, B C_K; B_K C, A_K] [x_t; xi_t]
//
// with stage weight blockdiag(Q, C_K^T R C_K).

#include <string>
#include <utility>

#include "dlqr/matops.hpp"

namespace dlqr {

inline constexpr double kDefaultStabilityMargin = 1e-9;

/// Linear plant x+ = A x + B u, y = C x with cost weights Q, R.
/// Construction validates dimensions, Q PSD, R PD, full-row-rank C and the
/// controllability/observability assumptions.
template <typename Scalar>
class BasicPlant {
 public:
  using Mat = MatrixX<Scalar>;

  BasicPlant(Mat A, Mat B, Mat C, Mat Q, Mat R)
      : A_(std::move(A)), B_(std::move(B)), C_(std::move(C)), Q_(std::move(Q)),
        R_(std::move(R)) {
    validate();
  }

  const Mat& A() const { return A_; }
  const Mat& B() const { return B_; }
  const Mat& C() const { return C_; }
  const Mat& Q() const { return Q_; }
  const Mat& R() const { return R_; }

  /// State, input and output dimensions.
  Eigen::Index n() const { return A_.rows(); }
  Eigen::Index m() const { return B_.cols(); }
  Eigen::Index d() const { return C_.rows(); }

  RankReport ranks() const { return rank_tests(A_, B_, C_, Q_); }

 private:
  void validate() const {
    const auto n = A_.rows();
    require(n >= 1 && A_.cols() == n, ErrorCode::DimensionMismatch,
            "plant: A must be square and non-empty");
    require(B_.rows() == n && B_.cols() >= 1, ErrorCode::DimensionMismatch,
            "plant: B must have n rows and at least one column");
    require(C_.cols() == n && C_.rows() >= 1, ErrorCode::DimensionMismatch,
            "plant: C must have n columns and at least one row");
    require(Q_.rows() == n && Q_.cols() == n, ErrorCode::DimensionMismatch,
            "plant: Q must be n x n");
    require(R_.rows() == B_.cols() && R_.cols() == B_.cols(),
            ErrorCode::DimensionMismatch, "plant: R must be m x m");
    require(A_.allFinite() && B_.allFinite() && C_.allFinite() &&
                Q_.allFinite() && R_.allFinite(),
            ErrorCode::InvalidInput, "plant: non-finite entries");
    require(is_psd(Q_), ErrorCode::InvalidInput,
            "plant: Q must be symmetric positive semidefinite");
    require(is_positive_definite(R_), ErrorCode::InvalidInput,
            "plant: R must be symmetric positive definite");
    require(numerical_rank(C_) == C_.rows(), ErrorCode::AssumptionViolated,
            "plant: C must have full row rank");
    const RankReport r = ranks();
    require(r.controllable, ErrorCode::AssumptionViolated,
            "plant: (A, B) is not controllable");
    require(r.observable_CA, ErrorCode::AssumptionViolated,
            "plant: (C, A) is not observable");
    require(r.observable_QA, ErrorCode::AssumptionViolated,
            "plant: (Q^{1/2}, A) is not observable");
  }

  Mat A_, B_, C_, Q_, R_;
};

/// Full-order strictly proper controller xi+ = A_K xi + B_K y, u = C_K xi.
template <typename Scalar>
struct BasicController {
  using Mat = MatrixX<Scalar>;

  Mat A_K;
  Mat B_K;
  Mat C_K;

  Eigen::Index order() const { return A_K.rows(); }

  Eigen::Index parameter_count() const {
    return A_K.size() + B_K.size() + C_K.size();
  }

  /// Parameters stacked as [vec(A_K); vec(B_K); vec(C_K)], column-major.
  VectorX<Scalar> flatten() const {
    VectorX<Scalar> v(parameter_count());
    Eigen::Index o = 0;
    for (const Mat* M : {&A_K, &B_K, &C_K}) {
      v.segment(o, M->size()) = Eigen::Map<const VectorX<Scalar>>(M->data(), M->size());
      o += M->size();
    }
    return v;
  }

  /// Inverse of flatten(), reusing this controller's block shapes.
  BasicController unflatten(const VectorX<Scalar>& v) const {
    require(v.size() == parameter_count(), ErrorCode::DimensionMismatch,
            "controller: parameter vector has wrong length");
    BasicController out = *this;
    Eigen::Index o = 0;
    for (Mat* M : {&out.A_K, &out.B_K, &out.C_K}) {
      *M = Eigen::Map<const Mat>(v.data() + o, M->rows(), M->cols());
      o += M->size();
    }
    return out;
  }

  Scalar norm() const {
    return std::sqrt(A_K.squaredNorm() + B_K.squaredNorm() + C_K.squaredNorm());
  }

  BasicController operator+(const BasicController& o) const {
    return {A_K + o.A_K, B_K + o.B_K, C_K + o.C_K};
  }
  BasicController operator-(const BasicController& o) const {
    return {A_K - o.A_K, B_K - o.B_K, C_K - o.C_K};
  }
  BasicController operator*(Scalar s) const { return {A_K * s, B_K * s, C_K * s}; }

  bool operator==(const BasicController& o) const {
    return A_K == o.A_K && B_K == o.B_K && C_K == o.C_K;
  }

  static BasicController zero(const BasicPlant<Scalar>& p) {
    return {Mat::Zero(p.n(), p.n()), Mat::Zero(p.n(), p.d()),
            Mat::Zero(p.m(), p.n())};
  }
};

template <typename Scalar>
void check_dimensions(const BasicPlant<Scalar>& p,
                      const BasicController<Scalar>& k) {
  const auto n = p.n(), m = p.m(), d = p.d();
  if (k.A_K.rows() != n || k.A_K.cols() != n || k.B_K.rows() != n ||
      k.B_K.cols() != d || k.C_K.rows() != m || k.C_K.cols() != n) {
    fail(ErrorCode::DimensionMismatch,
         "controller blocks must be A_K: n x n, B_K: n x d, C_K: m x n with n=" +
             std::to_string(n) + ", m=" + std::to_string(m) +
             ", d=" + std::to_string(d));
  }
  require(k.A_K.allFinite() && k.B_K.allFinite() && k.C_K.allFinite(),
          ErrorCode::InvalidInput, "controller: non-finite entries");
}

/// Second moment X = E[xbar_0 xbar_0^T] of the joint initial state (x_0, xi_0).
template <typename Scalar>
class BasicSecondMoment {
 public:
  using Mat = MatrixX<Scalar>;

  explicit BasicSecondMoment(Mat X) : X_(std::move(X)) {
    require(X_.rows() == X_.cols() && X_.rows() % 2 == 0 && X_.rows() > 0,
            ErrorCode::DimensionMismatch, "second moment must be 2n x 2n");
    require(X_.allFinite(), ErrorCode::InvalidInput,
            "second moment: non-finite entries");
    require(is_psd(X_), ErrorCode::InvalidInput,
            "second moment must be symmetric positive semidefinite");
    X_ = symmetrize(X_);
  }

  const Mat& matrix() const { return X_; }
  Eigen::Index n() const { return X_.rows() / 2; }

  Mat X11() const { return X_.topLeftCorner(n(), n()); }
  Mat X12() const { return X_.topRightCorner(n(), n()); }
  Mat X22() const { return X_.bottomRightCorner(n(), n()); }

  bool positive_definite() const { return is_positive_definite(X_); }

 private:
  Mat X_;
};

template <typename Scalar>
struct BasicClosedLoop {
  MatrixX<Scalar> A_cl;  // [A, B C_K; B_K C, A_K]
  MatrixX<Scalar> W_cl;  // blockdiag(Q, C_K^T R C_K)
};

using Plant = BasicPlant<double>;
using Controller = BasicController<double>;
using SecondMoment = BasicSecondMoment<double>;
using ClosedLoop = BasicClosedLoop<double>;

template <typename Scalar>
BasicClosedLoop<Scalar> assemble(const BasicPlant<Scalar>& p,
                                 const BasicController<Scalar>& k) {
  check_dimensions(p, k);
  const auto n = p.n();
  BasicClosedLoop<Scalar> cl;
  cl.A_cl.resize(2 * n, 2 * n);
  cl.A_cl << p.A(), p.B() * k.C_K, k.B_K * p.C(), k.A_K;
  cl.W_cl = MatrixX<Scalar>::Zero(2 * n, 2 * n);
  cl.W_cl.topLeftCorner(n, n) = p.Q();
  cl.W_cl.bottomRightCorner(n, n) = k.C_K.transpose() * p.R() * k.C_K;
  return cl;
}

template <typename Scalar>
Scalar closed_loop_spectral_radius(const BasicPlant<Scalar>& p,
                                   const BasicController<Scalar>& k) {
  return spectral_radius(assemble(p, k).A_cl);
}

/// True iff rho(A_cl) < 1 - margin.
template <typename Scalar>
bool is_stabilizing(const BasicPlant<Scalar>& p, const BasicController<Scalar>& k,
                    double margin = kDefaultStabilityMargin) {
  return closed_loop_spectral_radius(p, k) < 1 - Scalar(margin);
}

/// Kalman observability of (C_K, A_K).
template <typename Scalar>
bool is_observable_controller(const BasicController<Scalar>& k) {
  return is_observable(k.C_K, k.A_K);
}

/// (A - BK - LC, L, -K): the classical observer-based controller.
template <typename Scalar>
BasicController<Scalar> observer_based(const BasicPlant<Scalar>& p,
                                       const MatrixX<Scalar>& K,
                                       const MatrixX<Scalar>& L) {
  require(K.rows() == p.m() && K.cols() == p.n(), ErrorCode::DimensionMismatch,
          "observer_based: K must be m x n");
  require(L.rows() == p.n() && L.cols() == p.d(), ErrorCode::DimensionMismatch,
          "observer_based: L must be n x d");
  return {p.A() - p.B() * K - L * p.C(), L, -K};
}

/// Truncated cost sum_{t<horizon} Tr(W_cl A_cl^t X (A_cl^T)^t), propagating
/// the state covariance forward.
template <typename Scalar>
Scalar rollout_cost(const BasicPlant<Scalar>& p, const BasicController<Scalar>& k,
                    const BasicSecondMoment<Scalar>& X, int horizon) {
  require(horizon >= 1, ErrorCode::InvalidInput, "rollout: horizon must be >= 1");
  require(X.n() == p.n(), ErrorCode::DimensionMismatch,
          "rollout: second moment must be 2n x 2n");
  const auto cl = assemble(p, k);
  require(spectral_radius(cl.A_cl) < 1 - Scalar(kDefaultStabilityMargin),
          ErrorCode::NotStabilizing, "rollout: controller is not stabilizing");
  MatrixX<Scalar> S = X.matrix();
  Scalar total = 0;
  for (int t = 0; t < horizon; ++t) {
    total += (cl.W_cl.cwiseProduct(S)).sum();  // Tr(W S), both symmetric
    S = (cl.A_cl * S * cl.A_cl.transpose()).eval();
  }
  return total;
}

}  // namespace dlqr
