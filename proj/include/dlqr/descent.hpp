#pragma once

// Gradient descent over (A_K, B_K, C_K) that never leaves the stabilizing set.
//
// Each iteration backtracks from a trial step until the candidate is
// stabilizing and satisfies the Armijo condition
//
//   J(K - s G) <= J(K) - c s ||G||^2.
//
// The cost decrease is computed with cost_difference(), so the test stays
// meaningful when the decrease is far below the rounding level of J itself.

#include <cstdint>
#include <future>
#include <limits>
#include <random>
#include <string_view>
#include <vector>

#include "dlqr/gradient.hpp"

namespace dlqr {

enum class StepRule {
  // every line search starts from step0
  Fixed,
  // trial step s^T s / s^T y from the last two iterates, step0 as fallback
  BarzilaiBorwein,
};

struct DescentConfig {
  double step0 = 1e-2;
  double backtrack_factor = 0.5;
  double armijo_c = 1e-4;
  int max_iter = 100000;
  double grad_tol = 1e-8;
  StepRule step_rule = StepRule::BarzilaiBorwein;
  int max_backtracks = 60;
  double max_step = 1e3;

  void validate() const {
    require(step0 > 0, ErrorCode::InvalidInput, "descent: step0 must be > 0");
    require(backtrack_factor > 0 && backtrack_factor < 1, ErrorCode::InvalidInput,
            "descent: backtrack_factor must lie in (0, 1)");
    require(armijo_c > 0 && armijo_c < 1, ErrorCode::InvalidInput,
            "descent: armijo_c must lie in (0, 1)");
    require(max_iter >= 0, ErrorCode::InvalidInput, "descent: max_iter must be >= 0");
    require(grad_tol > 0, ErrorCode::InvalidInput, "descent: grad_tol must be > 0");
    require(max_backtracks >= 1 && max_step >= step0, ErrorCode::InvalidInput,
            "descent: invalid line-search limits");
  }
};

enum class DescentStatus { Converged, MaxIter, StabilityBoundary };

constexpr std::string_view to_string(DescentStatus s) {
  switch (s) {
    case DescentStatus::Converged: return "Converged";
    case DescentStatus::MaxIter: return "MaxIter";
    case DescentStatus::StabilityBoundary: return "StabilityBoundary";
  }
  return "Unknown";
}

template <typename Scalar>
struct BasicDescentIterate {
  BasicController<Scalar> controller;
  Scalar J;
  Scalar grad_norm;
  // Step that produced this iterate; 0 for the initial point.
  Scalar step;
};

template <typename Scalar>
struct BasicDescentTrace {
  std::vector<BasicDescentIterate<Scalar>> iterates;
  DescentStatus status = DescentStatus::MaxIter;

  const BasicDescentIterate<Scalar>& final() const { return iterates.back(); }
  std::size_t iterations() const { return iterates.size() - 1; }
};

using DescentTrace = BasicDescentTrace<double>;

/// J along the trace is J(init) plus the accumulated exact cost differences,
/// so it is strictly decreasing across accepted steps.
template <typename Scalar>
BasicDescentTrace<Scalar> descend(const BasicPlant<Scalar>& p,
                                  const BasicSecondMoment<Scalar>& X,
                                  const BasicController<Scalar>& init,
                                  const DescentConfig& cfg = {},
                                  const SolverConfig& solver = {}) {
  cfg.validate();
  check_dimensions(p, init);
  require(is_stabilizing(p, init, solver.stability_margin), ErrorCode::NotStabilizing,
          "descent: initial controller is not stabilizing");

  BasicDescentTrace<Scalar> trace;
  BasicController<Scalar> K = init;
  auto report = evaluate(p, K, X, solver);
  auto grad = gradient_from_blocks(p, K, report.P, report.Sigma);
  Scalar J = report.J;
  trace.iterates.push_back({K, J, grad.norm, Scalar(0)});

  VectorX<Scalar> prev_theta, prev_g;
  for (int it = 0;; ++it) {
    if (grad.norm <= Scalar(cfg.grad_tol)) {
      trace.status = DescentStatus::Converged;
      return trace;
    }
    if (it >= cfg.max_iter) {
      trace.status = DescentStatus::MaxIter;
      return trace;
    }
    const VectorX<Scalar> theta = K.flatten();
    const VectorX<Scalar> g = grad.as_controller().flatten();

    Scalar step = Scalar(cfg.step0);
    if (cfg.step_rule == StepRule::BarzilaiBorwein && prev_theta.size() > 0) {
      const VectorX<Scalar> s = theta - prev_theta;
      const VectorX<Scalar> y = g - prev_g;
      const Scalar sy = s.dot(y);
      if (sy > 0) step = std::min(s.squaredNorm() / sy, Scalar(cfg.max_step));
    }

    const Scalar g2 = grad.norm * grad.norm;
    bool accepted = false;
    BasicController<Scalar> next;
    Scalar decrease = 0;
    for (int bt = 0; bt < cfg.max_backtracks; ++bt, step *= Scalar(cfg.backtrack_factor)) {
      next = K.unflatten(theta - step * g);
      if (!is_stabilizing(p, next, solver.stability_margin)) continue;
      try {
        decrease = cost_difference(p, K, next, X, report.P, solver);
      } catch (const Error&) {
        continue;
      }
      if (decrease <= -Scalar(cfg.armijo_c) * step * g2) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      trace.status = DescentStatus::StabilityBoundary;
      return trace;
    }

    prev_theta = theta;
    prev_g = g;
    K = std::move(next);
    J += decrease;
    report = evaluate(p, K, X, solver);
    grad = gradient_from_blocks(p, K, report.P, report.Sigma);
    trace.iterates.push_back({K, J, grad.norm, step});
  }
}

struct InitOptions {
  // Entry-wise relative noise bound on the Riccati gains.
  double noise_scale = 0.5;
  int max_attempts = 1000;
};

namespace detail {

// Uniform on [-1, 1) from the top 53 bits; identical on every platform.
inline double symmetric_unit(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) * 0x1.0p-53) * 2.0 - 1.0;
}

}  // namespace detail

/// Observer-based controller from randomly perturbed Riccati gains, resampled
/// until it is stabilizing and observable. Deterministic in `seed`.
template <typename Scalar>
BasicController<Scalar> random_stabilizing_init(const BasicPlant<Scalar>& p,
                                                std::uint64_t seed,
                                                const InitOptions& opt = {}) {
  require(opt.noise_scale >= 0 && opt.max_attempts >= 1, ErrorCode::InvalidInput,
          "random init: invalid options");
  const MatrixX<Scalar> P = solve_dare_control(p.A(), p.B(), p.Q(), p.R());
  const MatrixX<Scalar> S = solve_dare_filter(
      p.A(), p.C(), MatrixX<Scalar>(MatrixX<Scalar>::Identity(p.n(), p.n())));
  const MatrixX<Scalar> K0 = dare_control_gain<Scalar>(p.A(), p.B(), p.R(), P);
  const MatrixX<Scalar> L0 = dare_filter_gain<Scalar>(p.A(), p.C(), S);

  std::mt19937_64 rng(seed);
  auto perturb = [&](const MatrixX<Scalar>& M) {
    MatrixX<Scalar> out = M;
    for (Eigen::Index j = 0; j < M.cols(); ++j)
      for (Eigen::Index i = 0; i < M.rows(); ++i)
        out(i, j) += Scalar(opt.noise_scale * detail::symmetric_unit(rng)) *
                     (1 + std::abs(M(i, j)));
    return out;
  };
  for (int attempt = 0; attempt < opt.max_attempts; ++attempt) {
    const MatrixX<Scalar> K = perturb(K0);
    const MatrixX<Scalar> L = perturb(L0);
    auto ctrl = observer_based(p, K, L);
    if (is_stabilizing(p, ctrl) && is_observable_controller(ctrl)) return ctrl;
  }
  fail(ErrorCode::InitFailed, "random init: no stabilizing observable controller "
                              "found within the attempt budget");
}

/// Independent descents from random_stabilizing_init(seed) for each seed, run
/// concurrently. Results are in seed order.
template <typename Scalar>
std::vector<BasicDescentTrace<Scalar>> multistart(const BasicPlant<Scalar>& p,
                                                  const BasicSecondMoment<Scalar>& X,
                                                  const std::vector<std::uint64_t>& seeds,
                                                  const DescentConfig& cfg = {},
                                                  const InitOptions& init = {}) {
  std::vector<std::future<BasicDescentTrace<Scalar>>> jobs;
  jobs.reserve(seeds.size());
  for (const auto seed : seeds) {
    jobs.push_back(std::async(std::launch::async, [&p, &X, &cfg, &init, seed] {
      return descend(p, X, random_stabilizing_init(p, seed, init), cfg);
    }));
  }
  std::vector<BasicDescentTrace<Scalar>> out;
  out.reserve(jobs.size());
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

}  // namespace dlqr
