// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "dlqr/dlqr.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using dlqr::Controller;
using dlqr::Matrix;
using dlqr::Transform;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

Outcome stationary_example(const dlqr::Plant& p, double a, double b, double c) {
  const auto cert = dlqr::stationary_candidate(p, fixtures::example_moment());
  const auto& k = cert.K_star;
  const double dev = std::max({std::abs(k.A_K(0, 0) - a), std::abs(k.B_K(0, 0) - b),
                               std::abs(k.C_K(0, 0) - c)});
  const double residual = cert.residuals.gradient_norm;
  return {dev <= 5e-4 && residual <= 1e-8,
          fmt("K* = (%.6f, %.6f, %.6f)", k.A_K(0, 0), k.B_K(0, 0), k.C_K(0, 0)) +
              fmt(", max deviation %.2e, gradient norm %.2e", dev, residual)};
}

Outcome ac1() { return stationary_example(fixtures::example1(), -0.944, 4.4, -0.236); }
Outcome ac2() { return stationary_example(fixtures::example2(), -0.765, 3.6, -0.191); }

Outcome ac3() {
  int count = 0;
  double worst = 0;
  std::uint64_t seed = 1000;
  for (Eigen::Index n = 1; n <= 3; ++n)
    for (Eigen::Index m = 1; m <= 2; ++m)
      for (Eigen::Index d = 1; d <= std::min<Eigen::Index>(n, 2); ++d) {
        const auto rp = fixtures::random_problem(n, m, d, seed++);
        for (int trial = 0; trial < 12; ++trial, ++count) {
          const auto k = dlqr::random_stabilizing_init(rp.plant, seed * 100 + trial);
          const auto ga = dlqr::analytic_gradient(rp.plant, k, rp.X);
          const auto gf = dlqr::finite_difference_gradient(rp.plant, k, rp.X);
          worst = std::max(worst, dlqr::relative_gradient_error(ga, gf));
        }
      }
  return {count >= 100 && worst <= 1e-5,
          fmt("%.0f controllers, max relative error %.2e", count, worst)};
}

Outcome ac4() {
  std::mt19937_64 rng(4);
  int count = 0;
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Eigen::Index n = 1 + seed % 3;
    const auto rp = fixtures::random_problem(n, 1 + seed % 2, 1, 2000 + seed);
    const auto k = dlqr::random_stabilizing_init(rp.plant, seed);
    const dlqr::Orbit orbit(rp.plant, k, rp.X);
    for (int trial = 0; trial < 3; ++trial, ++count) {
      const auto t = fixtures::random_transform(rng, n);
      const double direct = dlqr::evaluate(rp.plant, dlqr::apply(k, t), rp.X).J;
      worst = std::max(worst, std::abs(orbit.cost(t) - direct) / (1 + direct));
    }
  }
  return {count >= 50 && worst <= 1e-9,
          fmt("%.0f pairs, max |difference|/(1+J) %.2e", count, worst)};
}

Outcome ac5() {
  const auto p = fixtures::example1();
  const auto X = fixtures::example_moment();
  const auto dagger = dlqr::stationary_candidate(p, X).K_dagger;
  const auto opt = dlqr::optimal_transform(p, dagger, X);
  const dlqr::Orbit orbit(p, dagger, X);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> log_t(-3, 3);
  bool optimal = true;
  for (int trial = 0; trial < 100; ++trial) {
    const double t = (trial % 2 ? -1 : 1) * std::exp(log_t(rng));
    optimal = optimal && opt.cost <= orbit.cost(Transform(fixtures::scalar(t))) + 1e-9;
  }
  // Rank-one closed loop: A_cl = 1 a^T with a = (1.1, A_K).
  auto rank_one_P = [&](const Controller& k) {
    return oracle::rank_one_lyapunov(Eigen::Vector2d(1, 1), Eigen::Vector2d(1.1, k.A_K(0, 0)),
                                     dlqr::assemble(p, k).W_cl);
  };
  const Matrix P = rank_one_P(dagger);
  const double J_identity = (P * X.matrix()).trace();
  // T = 4 maps X to T-bar^{-1} X T-bar^{-T} = [[1, 1/16], [1/16, 1/16]].
  Matrix moved(2, 2);
  moved << 1, 0.0625, 0.0625, 0.0625;
  const double J_star = (P * moved).trace();

  // The quoted J(I) ~ 15.443 is the cost of the 3-decimal controller
  // (-0.944, 1.1, -0.944); the exact K-dagger has A_K = -0.943707 and
  // J(I) = 15.4401. Both are checked against the oracle.
  const Controller rounded = fixtures::example1_controller();
  const double J_rounded = (rank_one_P(rounded) * X.matrix()).trace();
  const double J_rounded_lib = dlqr::evaluate(p, rounded, X).J;

  const double T = opt.transform.T()(0, 0);
  const double J_I = orbit.cost(Transform::identity(1));
  const bool pass = std::abs(T - 4) <= 1e-9 && opt.gradient_residual <= 1e-9 && optimal &&
                    std::abs(opt.cost - J_star) <= 1e-9 * (1 + J_star) &&
                    std::abs(J_star - 11.914) <= 1e-3 &&
                    std::abs(J_I - J_identity) <= 1e-9 * (1 + J_identity) &&
                    std::abs(J_rounded_lib - J_rounded) <= 1e-9 * (1 + J_rounded) &&
                    std::abs(J_rounded - 15.443) <= 1e-3;
  return {pass, fmt("T* = %.12f, residual %.2e", T, opt.gradient_residual) +
                    fmt(", J(T*) = %.6f (oracle %.6f)", opt.cost, J_star) +
                    fmt(", J(I) = %.6f (oracle %.6f)", J_I, J_identity) +
                    fmt(", rounded K J(I) = %.6f", J_rounded_lib) +
                    (optimal ? ", beats 100 random T" : ", beaten by a random T")};
}

Outcome ac6() {
  std::vector<fixtures::RandomProblem> problems{{fixtures::example1(), fixtures::example_moment()},
                                                {fixtures::example2(), fixtures::example_moment()}};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Eigen::Index n = 1 + seed % 3;
    problems.push_back(fixtures::random_problem(n, 1 + seed % 2,
                                                std::min<Eigen::Index>(n, 1 + (seed / 2) % 2),
                                                3000 + seed));
  }
  double sigma = 0, moment = 0;
  for (const auto& pr : problems) {
    const auto cert = dlqr::stationary_candidate(pr.plant, pr.X);
    sigma = std::max(sigma, cert.residuals.sigma_identity);
    moment = std::max(moment, cert.residuals.moment_identity);
  }
  return {sigma <= 1e-8 && moment <= 1e-8,
          fmt("%.0f problems, max ||P12'S12 + P22 S22|| %.2e, max ||P12'X12 + P22 X22|| %.2e",
              problems.size(), sigma, moment)};
}

Outcome ac7() {
  const auto p = fixtures::example1();
  const auto X = fixtures::example_moment();
  const auto cert = dlqr::stationary_candidate(p, X);

  dlqr::SweepSpec orbit;
  orbit.base = fixtures::example1_controller();
  orbit.orbit = dlqr::OrbitRange{0.5, 8.0, 151};
  const double orbit_res = 7.5 / 150;
  const auto orbit_best = dlqr::grid_minimum(dlqr::run_sweep(p, X, orbit));

  dlqr::SweepSpec grid;
  grid.base = fixtures::example1_controller();
  grid.fixed = {{dlqr::ParamRef::parse("A_K"), -0.944}};
  grid.axes = {{dlqr::ParamRef::parse("B_K"), 0.0, 8.0, 161},
               {dlqr::ParamRef::parse("C_K"), -0.6, 0.0, 121}};
  const double res_b = 8.0 / 160, res_c = 0.6 / 120;
  const auto best = dlqr::grid_minimum(dlqr::run_sweep(p, X, grid));
  if (!orbit_best || !best) return {false, "no stabilizing cells"};

  const bool pass = std::abs(orbit_best->axis1 - 4) <= orbit_res + 1e-12 &&
                    std::abs(best->axis1 - cert.K_star.B_K(0, 0)) <= res_b + 1e-12 &&
                    std::abs(*best->axis2 - cert.K_star.C_K(0, 0)) <= res_c + 1e-12;
  return {pass, fmt("orbit minimum at T = %.4f; grid minimum at (B_K, C_K) = (%.4f, %.4f)",
                    orbit_best->axis1, best->axis1, *best->axis2) +
                    fmt(" with J = %.6f vs J(K*) = %.6f", *best->J, cert.J)};
}

Outcome ac8() {
  double worst_rollout = 0;
  int count = 0;
  const auto check = [&](const dlqr::Plant& p, const Controller& k, const dlqr::SecondMoment& X) {
    const double J = dlqr::evaluate(p, k, X).J;
    worst_rollout = std::max(worst_rollout, std::abs(J - dlqr::rollout_cost(p, k, X, 500)) / (1 + J));
    ++count;
  };
  const auto X = fixtures::example_moment();
  check(fixtures::example1(), fixtures::example1_controller(), X);
  check(fixtures::example2(), fixtures::scalar_controller(-0.765, 0.9, -0.765), X);
  for (const auto& p : {fixtures::example1(), fixtures::example2()}) {
    const auto cert = dlqr::stationary_candidate(p, X);
    check(p, cert.K_star, X);
    check(p, cert.K_dagger, X);
  }
  check(fixtures::example2(), Controller::zero(fixtures::example2()), X);
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    const Eigen::Index n = 1 + seed % 3;
    const auto rp = fixtures::random_problem(n, 1 + seed % 2, 1, 4000 + seed);
    check(rp.plant, dlqr::random_stabilizing_init(rp.plant, seed), rp.X);
  }

  std::mt19937_64 rng(8);
  double worst_solver = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const Eigen::Index n = 1 + trial % 12;
    Matrix A = fixtures::uniform(rng, n, n);
    const double rho = dlqr::spectral_radius(A);
    if (rho > 0) A *= 0.9 / rho;
    const Matrix G = fixtures::uniform(rng, n, n);
    const Matrix W = G * G.transpose();
    const Matrix Pk = dlqr::solve_dlyap_kronecker(A, W);
    worst_solver = std::max(worst_solver, (Pk - dlqr::solve_dlyap_doubling(A, W)).norm());
  }
  return {worst_rollout <= 1e-6 && worst_solver <= 1e-10,
          fmt("%.0f controllers, max |J - rollout|/(1+J) %.2e; Kronecker vs doubling %.2e",
              count, worst_rollout, worst_solver)};
}

Outcome ac9() {
  const auto p = fixtures::example1();
  const auto k = fixtures::example1_controller();
  const dlqr::SecondMoment X(Matrix::Identity(2, 2));

  bool transform_error = false;
  try {
    dlqr::optimal_transform(p, k, X);
  } catch (const dlqr::Error& e) {
    transform_error = e.code() == dlqr::ErrorCode::OptimalTransformNotFound;
  }

  std::ostringstream out, err;
  const std::string problem = fixtures::data_path("example1_x12_zero.json");
  const char* argv[] = {"dlqr", "stationary", "--problem", problem.c_str()};
  const int code = dlqr::cli::run(4, argv, out, err);

  const dlqr::Orbit orbit(p, k, X);
  const int steps = 400;
  bool decreasing = true;
  double previous = orbit.cost(Transform::identity(1));
  for (int i = 1; i <= steps; ++i) {
    const double t = std::pow(10.0, 4.0 * i / steps);
    const double J = orbit.cost(Transform(fixtures::scalar(t)));
    decreasing = decreasing && J < previous;
    previous = J;
  }
  const double infimum = orbit.report().P(0, 0);  // limit T -> infinity
  return {transform_error && code == 4 && decreasing && previous > infimum,
          std::string(transform_error ? "optimal_transform reports no minimizer"
                                      : "optimal_transform did not fail") +
              fmt(", stationary exit %.0f, ", code) +
              std::string(decreasing ? "strictly decreasing" : "not monotone") +
              fmt(" on [1, 1e4]: J(1e4) = %.9f > inf = %.9f", previous, infimum)};
}

Outcome ac10() {
  const auto X = fixtures::example_moment();
  std::vector<std::uint64_t> seeds(10);
  for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = i;
  double worst_grad = 0, worst_J = 0;
  std::size_t converged = 0, runs = 0;
  for (const auto& p : {fixtures::example1(), fixtures::example2()}) {
    const auto cert = dlqr::stationary_candidate(p, X);
    for (const auto& trace : dlqr::multistart(p, X, seeds)) {
      ++runs;
      converged += trace.status == dlqr::DescentStatus::Converged;
      worst_grad = std::max(worst_grad, trace.final().grad_norm);
      const double J = dlqr::evaluate(p, trace.final().controller, X).J;
      worst_J = std::max(worst_J, std::abs(J - cert.J));
    }
  }
  return {converged == runs && worst_grad <= 1e-8 && worst_J <= 1e-6,
          fmt("%.0f/%.0f converged, max gradient norm %.2e", converged, runs, worst_grad) +
              fmt(", max |J - J(K*)| %.2e", worst_J)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"AC1  Example 1 stationary point", ac1},
      {"AC2  Example 2 stationary point", ac2},
      {"AC3  analytic gradient vs finite differences", ac3},
      {"AC4  orbit cost from P_K", ac4},
      {"AC5  optimal similarity transform", ac5},
      {"AC6  identities at the stationary point", ac6},
      {"AC7  landscape and orbit minima", ac7},
      {"AC8  cost oracles and Lyapunov solvers", ac8},
      {"AC9  no optimal transform when X12 = 0", ac9},
      {"AC10 multi-start descent", ac10},
  };
  int failures = 0;
  const auto start = std::chrono::steady_clock::now();
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %-46s %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("%d/%zu criteria passed in %.2f s\n", static_cast<int>(criteria.size()) - failures,
              criteria.size(), seconds);
  return failures == 0 ? 0 : 1;
}
