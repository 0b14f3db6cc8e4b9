#pragma once

#include <cmath>
#include <optional>
#include <limits>
#include <string>
#include <vector>

#include "dlqr/cost.hpp"

namespace dlqr {

template <typename Scalar>
struct BasicGradientTriple {
  MatrixX<Scalar> dA_K;
  MatrixX<Scalar> dB_K;
  MatrixX<Scalar> dC_K;
  Scalar norm = 0;

  static BasicGradientTriple from_blocks(MatrixX<Scalar> dA, MatrixX<Scalar> dB,
                                         MatrixX<Scalar> dC) {
    BasicGradientTriple g{std::move(dA), std::move(dB), std::move(dC), 0};
    g.norm = std::sqrt(g.dA_K.squaredNorm() + g.dB_K.squaredNorm() +
                       g.dC_K.squaredNorm());
    return g;
  }

  /// The gradient laid out as a controller-shaped value (for parameter steps).
  BasicController<Scalar> as_controller() const { return {dA_K, dB_K, dC_K}; }
};

using GradientTriple = BasicGradientTriple<double>;

/// Policy gradient evaluated from given P and Sigma. For fixed (P, Sigma) each
/// block is affine in (A_K, B_K, C_K).
///
///   dC_K = 2 B^T (P11 A + P12 B_K C) S12 + 2 ((R + B^T P11 B) C_K + B^T P12 A_K) S22
///   dB_K = 2 (P12^T A + P22 B_K C) S11 C^T + 2 (P12^T B C_K + P22 A_K) S12^T C^T
///   dA_K = 2 (P12^T B C_K + P22 A_K) S22 + 2 (P12^T A + P22 B_K C) S12
template <typename Scalar>
BasicGradientTriple<Scalar> gradient_from_blocks(const BasicPlant<Scalar>& p,
                                                 const BasicController<Scalar>& k,
                                                 const MatrixX<Scalar>& P,
                                                 const MatrixX<Scalar>& Sigma) {
  check_dimensions(p, k);
  const auto n = p.n();
  require(P.rows() == 2 * n && Sigma.rows() == 2 * n, ErrorCode::DimensionMismatch,
          "gradient: P and Sigma must be 2n x 2n");
  const auto& A = p.A();
  const auto& B = p.B();
  const auto& C = p.C();
  const MatrixX<Scalar> P11 = P.topLeftCorner(n, n);
  const MatrixX<Scalar> P12 = P.topRightCorner(n, n);
  const MatrixX<Scalar> P22 = P.bottomRightCorner(n, n);
  const MatrixX<Scalar> S11 = Sigma.topLeftCorner(n, n);
  const MatrixX<Scalar> S12 = Sigma.topRightCorner(n, n);
  const MatrixX<Scalar> S22 = Sigma.bottomRightCorner(n, n);

  // Shared factors: rows of P_K^T A_cl restricted to the controller block.
  const MatrixX<Scalar> plant_part = P12.transpose() * A + P22 * k.B_K * C;
  const MatrixX<Scalar> ctrl_part = P12.transpose() * B * k.C_K + P22 * k.A_K;

  MatrixX<Scalar> dC =
      2 * B.transpose() * (P11 * A + P12 * k.B_K * C) * S12 +
      2 * ((p.R() + B.transpose() * P11 * B) * k.C_K + B.transpose() * P12 * k.A_K) *
          S22;
  MatrixX<Scalar> dB = 2 * plant_part * S11 * C.transpose() +
                       2 * ctrl_part * S12.transpose() * C.transpose();
  MatrixX<Scalar> dA = 2 * ctrl_part * S22 + 2 * plant_part * S12;
  return BasicGradientTriple<Scalar>::from_blocks(std::move(dA), std::move(dB),
                                                  std::move(dC));
}

template <typename Scalar>
BasicGradientTriple<Scalar> analytic_gradient(const BasicPlant<Scalar>& p,
                                              const BasicController<Scalar>& k,
                                              const BasicSecondMoment<Scalar>& X,
                                              const SolverConfig& cfg = {}) {
  const auto r = evaluate(p, k, X, cfg);
  return gradient_from_blocks(p, k, r.P, r.Sigma);
}

/// ||grad J(K)||_F; zero exactly on the stationary set.
template <typename Scalar>
Scalar stationarity_residual(const BasicPlant<Scalar>& p,
                             const BasicController<Scalar>& k,
                             const BasicSecondMoment<Scalar>& X,
                             const SolverConfig& cfg = {}) {
  return analytic_gradient(p, k, X, cfg).norm;
}

struct FiniteDifferenceOptions {
  // Largest initial per-coordinate step is step * (1 + |theta_i|).
  double step = 1e-2;
  // Halvings allowed when theta +- h leaves the feasible set.
  int max_halvings = 20;
  // Ridders extrapolation over this many steps, each 1.4x smaller than the
  // last. 1 gives a plain central difference.
  int extrapolation_levels = 10;
  // Extrapolation is restarted from step, step/10, ... over this many
  // decades and the estimate with the smallest error bound is kept. Near the
  // stability boundary only the small starting steps are accurate.
  int start_decades = 6;
};

namespace detail {

template <typename Scalar>
struct Extrapolated {
  Scalar value;
  Scalar error;
};

// Ridders' method: central differences at h, h/1.4, ... extrapolated with a
// Neville tableau. `slope(h)` is nullopt when theta +- h is infeasible.
template <typename Scalar, typename Slope>
Extrapolated<Scalar> ridders(Slope&& slope, Scalar h, Scalar first, int levels) {
  constexpr Scalar kShrink = Scalar(1.4);
  constexpr Scalar kShrink2 = kShrink * kShrink;
  std::vector<Scalar> prev{first}, cur;
  Extrapolated<Scalar> best{first, std::numeric_limits<Scalar>::infinity()};
  for (int level = 1; level < levels; ++level) {
    h /= kShrink;
    const std::optional<Scalar> d = slope(h);
    if (!d) break;
    cur.assign(1, *d);
    Scalar fac = kShrink2;
    for (int j = 1; j <= level; ++j) {
      cur.push_back((cur[j - 1] * fac - prev[j - 1]) / (fac - 1));
      fac *= kShrink2;
      const Scalar err =
          std::max(std::abs(cur[j] - cur[j - 1]), std::abs(cur[j] - prev[j - 1]));
      if (err <= best.error) best = {cur[j], err};
    }
    // Higher orders have started to lose to rounding.
    if (std::abs(cur[level] - prev[level - 1]) >= 2 * best.error) break;
    prev.swap(cur);
  }
  return best;
}

}  // namespace detail

/// Central differences of f at theta, extrapolated to h -> 0. f returns
/// nullopt outside its domain; every coordinate is computed independently.
template <typename Scalar, typename F>
VectorX<Scalar> central_difference(F&& f, const VectorX<Scalar>& theta,
                                   const FiniteDifferenceOptions& opt = {}) {
  require(opt.step > 0 && opt.max_halvings >= 0 && opt.extrapolation_levels >= 1 &&
              opt.start_decades >= 1,
          ErrorCode::InvalidInput, "finite differences: invalid options");
  VectorX<Scalar> grad(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    auto slope = [&](Scalar h) -> std::optional<Scalar> {
      VectorX<Scalar> plus = theta, minus = theta;
      plus(i) += h;
      minus(i) -= h;
      const std::optional<Scalar> fp = f(plus);
      const std::optional<Scalar> fm = fp ? f(minus) : std::nullopt;
      if (!fp || !fm) return std::nullopt;
      // Use the step actually represented in floating point.
      return (*fp - *fm) / (plus(i) - minus(i));
    };

    Scalar h = Scalar(opt.step) * (1 + std::abs(theta(i)));
    std::optional<Scalar> first;
    for (int attempt = 0; attempt <= opt.max_halvings && !first; ++attempt) {
      first = slope(h);
      if (!first) h /= 2;
    }
    if (!first) {
      fail(ErrorCode::NotStabilizing,
           "finite differences: perturbation of coordinate " + std::to_string(i) +
               " leaves the feasible set after all step halvings");
    }

    auto best = detail::ridders<Scalar>(slope, h, *first, opt.extrapolation_levels);
    for (int decade = 1; decade < opt.start_decades; ++decade) {
      h /= 10;
      const std::optional<Scalar> d = slope(h);
      if (!d) continue;
      const auto e = detail::ridders<Scalar>(slope, h, *d, opt.extrapolation_levels);
      if (e.error < best.error) best = e;
    }
    grad(i) = best.value;
  }
  return grad;
}

template <typename Scalar>
BasicGradientTriple<Scalar> finite_difference_gradient(
    const BasicPlant<Scalar>& p, const BasicController<Scalar>& k,
    const BasicSecondMoment<Scalar>& X, const FiniteDifferenceOptions& opt = {},
    const SolverConfig& cfg = {}) {
  check_dimensions(p, k);
  require(is_stabilizing(p, k, cfg.stability_margin), ErrorCode::NotStabilizing,
          "finite differences: base controller is not stabilizing");
  auto cost = [&](const VectorX<Scalar>& theta) -> std::optional<Scalar> {
    const auto kk = k.unflatten(theta);
    if (!is_stabilizing(p, kk, cfg.stability_margin)) return std::nullopt;
    return evaluate(p, kk, X, cfg).J;
  };
  const auto g = k.unflatten(central_difference<Scalar>(cost, k.flatten(), opt));
  return BasicGradientTriple<Scalar>::from_blocks(g.A_K, g.B_K, g.C_K);
}

/// ||a - b||_F / ||a||_F over the stacked blocks (absolute when ||a|| = 0).
template <typename Scalar>
Scalar relative_gradient_error(const BasicGradientTriple<Scalar>& a,
                               const BasicGradientTriple<Scalar>& b) {
  const Scalar diff = std::sqrt((a.dA_K - b.dA_K).squaredNorm() +
                                (a.dB_K - b.dB_K).squaredNorm() +
                                (a.dC_K - b.dC_K).squaredNorm());
  return a.norm > 0 ? diff / a.norm : diff;
}

}  // namespace dlqr
