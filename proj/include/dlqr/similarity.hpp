#pragma once

// Controller similarity transformations T_T(K) = (T A_K T^{-1}, T B_K, C_K T^{-1})
// and the cost along a similarity orbit,
//
//   J(T_T(K)) = Tr(P_K Tbar^{-1} X Tbar^{-T}),   Tbar = blockdiag(I, T),
//
// viewed as g(H) with H = T^{-1}:
//
//   g(H) = Tr(P11 X11 + P12 H X12^T + P12^T X12 H^T + P22 H X22 H^T).
//
// g is strongly convex in H when P22 > 0 and X22 > 0; its stationary point is
// H* = -P22^{-1} P12^T X12 X22^{-1}, i.e. T* = -X22 X12^{-1} P12^{-T} P22.

#include <string>

#include "dlqr/cost.hpp"

namespace dlqr {

// X12 and P12 are treated as singular below this sigma_min / sigma_max.
inline constexpr double kSingularityThreshold = 1e-10;

template <typename Scalar>
class BasicTransform {
 public:
  using Mat = MatrixX<Scalar>;

  explicit BasicTransform(Mat T) : T_(std::move(T)) {
    require(T_.rows() == T_.cols() && T_.rows() > 0, ErrorCode::NonSquare,
            "transform must be a non-empty square matrix");
    require(T_.allFinite(), ErrorCode::InvalidInput, "transform: non-finite entries");
    Eigen::FullPivLU<Mat> lu(T_);
    if (!lu.isInvertible()) fail(ErrorCode::SingularTransform, "T is singular");
    if (inverse_condition(T_) < Scalar(kSingularityThreshold)) {
      fail(ErrorCode::SingularTransform, "T is numerically singular");
    }
    const Mat I = Mat::Identity(T_.rows(), T_.cols());
    T_inv_ = lu.solve(I);
    T_inv_ += lu.solve(Mat(I - T_ * T_inv_));
    if (!((T_ * T_inv_ - I).norm() <= Scalar(1e-10))) {
      fail(ErrorCode::SingularTransform, "T is too ill-conditioned to invert");
    }
  }

  static BasicTransform identity(Eigen::Index n) {
    return BasicTransform(Mat::Identity(n, n));
  }

  const Mat& T() const { return T_; }
  const Mat& T_inv() const { return T_inv_; }
  Eigen::Index n() const { return T_.rows(); }

  /// blockdiag(I, T^{-1})
  Mat T_bar_inv() const {
    Mat out = Mat::Identity(2 * n(), 2 * n());
    out.bottomRightCorner(n(), n()) = T_inv_;
    return out;
  }

 private:
  Mat T_;
  Mat T_inv_;
};

using Transform = BasicTransform<double>;

template <typename Scalar>
BasicController<Scalar> apply(const BasicController<Scalar>& k,
                              const BasicTransform<Scalar>& t) {
  require(k.A_K.rows() == t.n() && k.B_K.rows() == t.n() && k.C_K.cols() == t.n(),
          ErrorCode::DimensionMismatch, "transform size must match controller order");
  return {t.T() * k.A_K * t.T_inv(), t.T() * k.B_K, k.C_K * t.T_inv()};
}

/// Value matrix of T_T(K) from that of K: Tbar^{-T} P_K Tbar^{-1}.
template <typename Scalar>
MatrixX<Scalar> transformed_value_matrix(const MatrixX<Scalar>& P,
                                         const BasicTransform<Scalar>& t) {
  const MatrixX<Scalar> Ti = t.T_bar_inv();
  return Ti.transpose() * P * Ti;
}

template <typename Scalar>
Scalar g_value(const MatrixX<Scalar>& P, const BasicSecondMoment<Scalar>& X,
               const MatrixX<Scalar>& H) {
  const auto n = X.n();
  const MatrixX<Scalar> P11 = P.topLeftCorner(n, n), P12 = P.topRightCorner(n, n),
                        P22 = P.bottomRightCorner(n, n);
  const MatrixX<Scalar> X12 = X.X12();
  return (P11 * X.X11()).trace() + 2 * (P12 * H * X12.transpose()).trace() +
         (P22 * H * X.X22() * H.transpose()).trace();
}

/// 2 (P12^T X12 + P22 H X22)
template <typename Scalar>
MatrixX<Scalar> g_gradient(const MatrixX<Scalar>& P,
                           const BasicSecondMoment<Scalar>& X,
                           const MatrixX<Scalar>& H) {
  const auto n = X.n();
  return 2 * (P.topRightCorner(n, n).transpose() * X.X12() +
              P.bottomRightCorner(n, n) * H * X.X22());
}

/// Second derivative of g along Z: 2 Tr(P22 Z X22 Z^T). Independent of H.
template <typename Scalar>
Scalar g_hessian_form(const BasicCostReport<Scalar>& r,
                      const BasicSecondMoment<Scalar>& X, const MatrixX<Scalar>& Z) {
  return 2 * (r.P22() * Z * X.X22() * Z.transpose()).trace();
}

/// Cost along the similarity orbit of one controller. P_K is solved once at
/// construction and reused for every T.
template <typename Scalar>
class BasicOrbit {
 public:
  BasicOrbit(const BasicPlant<Scalar>& p, BasicController<Scalar> k,
             BasicSecondMoment<Scalar> X, const SolverConfig& cfg = {})
      : controller_(std::move(k)), X_(std::move(X)),
        report_(evaluate(p, controller_, X_, cfg)) {}

  Scalar cost(const BasicTransform<Scalar>& t) const {
    require(t.n() == X_.n(), ErrorCode::DimensionMismatch,
            "orbit: transform size must match controller order");
    const MatrixX<Scalar> Ti = t.T_bar_inv();
    return (report_.P.cwiseProduct(Ti * X_.matrix() * Ti.transpose())).sum();
  }

  const BasicController<Scalar>& controller() const { return controller_; }
  const BasicCostReport<Scalar>& report() const { return report_; }

 private:
  BasicController<Scalar> controller_;
  BasicSecondMoment<Scalar> X_;
  BasicCostReport<Scalar> report_;
};

using Orbit = BasicOrbit<double>;

/// J(T_T(K)) computed from P_K alone.
template <typename Scalar>
Scalar transformed_cost(const BasicPlant<Scalar>& p, const BasicController<Scalar>& k,
                        const BasicSecondMoment<Scalar>& X,
                        const BasicTransform<Scalar>& t, const SolverConfig& cfg = {}) {
  return BasicOrbit<Scalar>(p, k, X, cfg).cost(t);
}

template <typename Scalar>
struct BasicOptimalTransform {
  BasicTransform<Scalar> transform;
  // ||grad_H g(H*)||_F at H* = T*^{-1}
  Scalar gradient_residual;
  // J(T_{T*}(K))
  Scalar cost;
};

using OptimalTransform = BasicOptimalTransform<double>;

/// The unique minimizer of J over the similarity orbit of an observable
/// stabilizing K (X > 0). Throws OptimalTransformNotFound when X12 or P12 is
/// numerically singular, in which case no minimizer is attained.
template <typename Scalar>
BasicOptimalTransform<Scalar> optimal_transform(const BasicPlant<Scalar>& p,
                                                const BasicController<Scalar>& k,
                                                const BasicSecondMoment<Scalar>& X,
                                                const SolverConfig& cfg = {}) {
  require(X.n() == p.n(), ErrorCode::DimensionMismatch,
          "optimal_transform: second moment must be 2n x 2n");
  require(X.positive_definite(), ErrorCode::InvalidInput,
          "optimal_transform: X must be positive definite");
  require(is_stabilizing(p, k, cfg.stability_margin), ErrorCode::NotStabilizing,
          "optimal_transform: controller is not stabilizing");
  require(is_observable_controller(k), ErrorCode::NotObservable,
          "optimal_transform: (C_K, A_K) is not observable");

  const BasicOrbit<Scalar> orbit(p, k, X, cfg);
  const auto& r = orbit.report();
  const MatrixX<Scalar> X12 = X.X12(), P12 = r.P12(), P22 = r.P22();
  if (inverse_condition(X12) < Scalar(kSingularityThreshold)) {
    fail(ErrorCode::OptimalTransformNotFound,
         "X12 is singular: the orbit cost has no attained minimizer");
  }
  if (inverse_condition(P12) < Scalar(kSingularityThreshold)) {
    fail(ErrorCode::OptimalTransformNotFound,
         "P12 is singular: the orbit cost has no attained minimizer");
  }
  // T* = -X22 X12^{-1} P12^{-T} P22
  const MatrixX<Scalar> X12_inv = X12.fullPivLu().inverse();
  const MatrixX<Scalar> P12t_inv_P22 = P12.transpose().fullPivLu().solve(P22);
  BasicTransform<Scalar> t(MatrixX<Scalar>(-X.X22() * X12_inv * P12t_inv_P22));

  const Scalar residual = g_gradient(r.P, X, t.T_inv()).norm();
  const Scalar scale = 1 + (P12.transpose() * X12).norm();
  require(residual <= Scalar(1e-9) * scale, ErrorCode::SolverDiverged,
          "optimal_transform: first-order condition not met (residual " +
              std::to_string(double(residual)) + ")");
  const Scalar c = orbit.cost(t);
  return {std::move(t), residual, c};
}

}  // namespace dlqr
