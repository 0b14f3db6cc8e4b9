#pragma once

// Subcommands of the `dlqr` tool. Each returns the process exit code:
//   0 ok, 1 numerical failure, 2 not stabilizing, 3 input error,
//   4 non-existence (singular X12 / no optimal transform), 5 check failed.

#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dlqr/dlqr.hpp"

namespace dlqr::cli {

enum ExitCode : int {
  kOk = 0,
  kNumericalFailure = 1,
  kNotStabilizing = 2,
  kInputError = 3,
  kNonExistence = 4,
  kCheckFailed = 5,
};

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotStabilizing:
    case ErrorCode::Unstable:
      return kNotStabilizing;
    case ErrorCode::NonSquare:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::InvalidInput:
    case ErrorCode::AssumptionViolated:
    case ErrorCode::NotObservable:
    case ErrorCode::SingularTransform:
    case ErrorCode::SchemaError:
      return kInputError;
    case ErrorCode::SingularX12:
    case ErrorCode::OptimalTransformNotFound:
      return kNonExistence;
    case ErrorCode::SolverDiverged:
    case ErrorCode::SingularInnovation:
    case ErrorCode::InitFailed:
      return kNumericalFailure;
  }
  return kNumericalFailure;
}

struct Options {
  std::string problem;
  std::string out;
  std::string controller;
  bool json = false;
  std::uint64_t seed = 0;
  std::optional<double> tol;
  int trials = 20;
  // landscape
  std::vector<std::string> axes;
  std::vector<std::string> fixed;
  std::string orbit;
  unsigned threads = 0;
  // descend
  int max_iter = 100000;
  double step0 = 1e-2;
  std::string step_rule = "bb";
};

using GradientFn =
    std::function<GradientTriple(const Plant&, const Controller&, const SecondMoment&)>;

inline GradientTriple default_gradient(const Plant& p, const Controller& k,
                                       const SecondMoment& X) {
  return analytic_gradient(p, k, X);
}

namespace detail {

inline std::string format_matrix(const Matrix& M) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    s += i ? ", [" : "[";
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      if (j) s += ", ";
      s += format_number(M(i, j));
    }
    s += "]";
  }
  return s + "]";
}

inline void print_controller(std::ostream& os, const std::string& label,
                             const Controller& k) {
  os << label << ".A_K = " << format_matrix(k.A_K) << '\n'
     << label << ".B_K = " << format_matrix(k.B_K) << '\n'
     << label << ".C_K = " << format_matrix(k.C_K) << '\n';
}

inline Controller resolve_controller(const Options& o, const Problem& prob) {
  if (!o.controller.empty()) {
    Controller k = controller_from_json(read_json_file(o.controller));
    check_dimensions(prob.plant, k);
    return k;
  }
  require(prob.seed_controller.has_value(), ErrorCode::SchemaError,
          "no controller: pass --controller or add seed_controller to the problem");
  return *prob.seed_controller;
}

// Writes to --out when given, otherwise to `fallback`.
inline void emit(const Options& o, std::ostream& fallback, const std::string& text) {
  if (o.out.empty()) {
    fallback << text;
    return;
  }
  std::ofstream f(o.out, std::ios::binary);
  require(static_cast<bool>(f), ErrorCode::SchemaError, "cannot write '" + o.out + "'");
  f << text;
}

template <typename Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NotStabilizing) err << "error: not stabilizing\n";
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kNumericalFailure;
  }
}

inline std::pair<double, double> split_range(const std::string& text, int& steps) {
  double lo = 0, hi = 0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%lf:%lf:%d%c", &lo, &hi, &steps, &tail) != 3) {
    fail(ErrorCode::SchemaError, "expected min:max:steps, got '" + text + "'");
  }
  return {lo, hi};
}

}  // namespace detail

inline SweepSpec parse_sweep(const Options& o, Controller base) {
  SweepSpec spec;
  spec.base = std::move(base);
  for (const auto& f : o.fixed) {
    const auto eq = f.find('=');
    require(eq != std::string::npos, ErrorCode::SchemaError,
            "--fix expects PARAM=value, got '" + f + "'");
    char* end = nullptr;
    const std::string value = f.substr(eq + 1);
    const double v = std::strtod(value.c_str(), &end);
    require(end && *end == '\0' && !value.empty(), ErrorCode::SchemaError,
            "--fix: bad value in '" + f + "'");
    spec.fixed.emplace_back(ParamRef::parse(f.substr(0, eq)), v);
  }
  for (const auto& a : o.axes) {
    const auto eq = a.find('=');
    require(eq != std::string::npos, ErrorCode::SchemaError,
            "--axis expects PARAM=min:max:steps, got '" + a + "'");
    SweepAxis axis;
    axis.param = ParamRef::parse(a.substr(0, eq));
    std::tie(axis.min, axis.max) = detail::split_range(a.substr(eq + 1), axis.steps);
    spec.axes.push_back(axis);
  }
  if (!o.orbit.empty()) {
    OrbitRange r;
    std::tie(r.min, r.max) = detail::split_range(o.orbit, r.steps);
    spec.orbit = r;
  }
  spec.validate();
  return spec;
}

inline int cmd_eval(const Options& o, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    const Problem prob = load_problem(o.problem);
    const Controller k = detail::resolve_controller(o, prob);
    SolverConfig cfg;
    if (o.tol) cfg.tol = *o.tol;
    const double rho = closed_loop_spectral_radius(prob.plant, k);
    const CostReport r = evaluate(prob.plant, k, prob.X, cfg);
    const BlockResiduals b = block_lyapunov_residuals(prob.plant, k, r, prob.X);
    const double lmin_P = min_eigenvalue_symmetric(r.P);
    const double lmin_S = min_eigenvalue_symmetric(r.Sigma);

    std::ostringstream os;
    if (o.json) {
      json j = {{"J", r.J},
                {"J_dual", r.J_dual},
                {"rho", rho},
                {"lambda_min_P", lmin_P},
                {"lambda_min_Sigma", lmin_S},
                {"block_residuals",
                 {{"P11", b.rP11}, {"P12", b.rP12}, {"P22", b.rP22},
                  {"Sigma11", b.rS11}, {"Sigma12", b.rS12}, {"Sigma22", b.rS22}}},
                {"controller", controller_to_json(k)},
                {"P", matrix_to_json(r.P)},
                {"Sigma", matrix_to_json(r.Sigma)}};
      os << j.dump(2) << '\n';
    } else {
      os << "J = " << format_number(r.J) << '\n'
         << "J_dual = " << format_number(r.J_dual) << '\n'
         << "rho = " << format_number(rho) << '\n'
         << "lambda_min(P) = " << format_number(lmin_P) << '\n'
         << "lambda_min(Sigma) = " << format_number(lmin_S) << '\n'
         << "block residuals: P11 " << format_number(b.rP11) << ", P12 "
         << format_number(b.rP12) << ", P22 " << format_number(b.rP22)
         << ", Sigma11 " << format_number(b.rS11) << ", Sigma12 "
         << format_number(b.rS12) << ", Sigma22 " << format_number(b.rS22) << '\n';
    }
    detail::emit(o, out, os.str());
    return int(kOk);
  });
}

inline int cmd_stationary(const Options& o, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    const Problem prob = load_problem(o.problem);
    const double tol = o.tol.value_or(kStationaryTolerance);
    const StationaryCertificate c = stationary_candidate(prob.plant, prob.X);
    const bool ok = c.verified(tol);

    std::ostringstream os;
    if (o.json) {
      json residuals = json::object();
      for (const auto& [name, v] : c.residuals.entries()) residuals[name] = v;
      residuals["optimal_transform_gap"] = c.optimal_transform_gap;
      json j = {{"K_star", controller_to_json(c.K_star)},
                {"K_dagger", controller_to_json(c.K_dagger)},
                {"K_gain", matrix_to_json(c.K_gain)},
                {"L_gain", matrix_to_json(c.L_gain)},
                {"T_star", matrix_to_json(c.T_star.T())},
                {"P_hat", matrix_to_json(c.P_hat)},
                {"Sigma_hat", matrix_to_json(c.Sigma_hat)},
                {"Delta_X", matrix_to_json(c.Delta_X)},
                {"J", c.J},
                {"residuals", residuals},
                {"verified", ok}};
      os << j.dump(2) << '\n';
    } else {
      detail::print_controller(os, "K_star", c.K_star);
      detail::print_controller(os, "K_dagger", c.K_dagger);
      os << "K_gain = " << detail::format_matrix(c.K_gain) << '\n'
         << "L_gain = " << detail::format_matrix(c.L_gain) << '\n'
         << "T_star = " << detail::format_matrix(c.T_star.T()) << '\n'
         << "P_hat = " << detail::format_matrix(c.P_hat) << '\n'
         << "Sigma_hat = " << detail::format_matrix(c.Sigma_hat) << '\n'
         << "J = " << format_number(c.J) << '\n';
      for (const auto& [name, v] : c.residuals.entries())
        os << "residual." << name << " = " << format_number(v) << '\n';
      os << "residual.optimal_transform_gap = " << format_number(c.optimal_transform_gap)
         << '\n'
         << "verified = " << (ok ? "true" : "false") << '\n';
    }
    detail::emit(o, out, os.str());
    if (!ok) err << "error: stationarity residuals exceed " << tol << '\n';
    return int(ok ? kOk : kCheckFailed);
  });
}

inline int cmd_landscape(const Options& o, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    const Problem prob = load_problem(o.problem);
    Controller base = Controller::zero(prob.plant);
    if (!o.controller.empty() || prob.seed_controller)
      base = detail::resolve_controller(o, prob);
    const SweepSpec spec = parse_sweep(o, base);
    SolverConfig cfg;
    if (o.tol) cfg.tol = *o.tol;
    const auto cells = run_sweep(prob.plant, prob.X, spec, o.threads, cfg);
    std::ostringstream os;
    write_landscape_csv(os, cells);
    detail::emit(o, out, os.str());
    if (const auto best = grid_minimum(cells)) {
      err << "grid minimum: axis1 = " << format_number(best->axis1);
      if (best->axis2) err << ", axis2 = " << format_number(*best->axis2);
      err << ", J = " << format_number(*best->J) << '\n';
    }
    return int(kOk);
  });
}

inline int cmd_gradcheck(const Options& o, std::ostream& out, std::ostream& err,
                         const GradientFn& gradient = default_gradient) {
  return detail::guarded(err, [&] {
    const Problem prob = load_problem(o.problem);
    const double tol = o.tol.value_or(1e-5);
    require(o.trials >= 0, ErrorCode::SchemaError, "--trials must be >= 0");
    std::vector<Controller> controllers;
    if (!o.controller.empty() || prob.seed_controller)
      controllers.push_back(detail::resolve_controller(o, prob));
    for (int t = 0; t < o.trials; ++t)
      controllers.push_back(random_stabilizing_init(prob.plant, o.seed + t));
    require(!controllers.empty(), ErrorCode::SchemaError, "gradcheck: nothing to check");

    double worst = 0;
    for (const auto& k : controllers) {
      const auto ga = gradient(prob.plant, k, prob.X);
      const auto gf = finite_difference_gradient(prob.plant, k, prob.X);
      worst = std::max(worst, relative_gradient_error(gf, ga));
    }
    const bool ok = worst <= tol;
    std::ostringstream os;
    if (o.json) {
      os << json{{"controllers", controllers.size()},
                 {"max_relative_error", worst},
                 {"tolerance", tol},
                 {"passed", ok}}
                .dump(2)
         << '\n';
    } else {
      os << "controllers = " << controllers.size() << '\n'
         << "max_relative_error = " << format_number(worst) << '\n'
         << "tolerance = " << format_number(tol) << '\n'
         << (ok ? "PASS" : "FAIL") << '\n';
    }
    detail::emit(o, out, os.str());
    return int(ok ? kOk : kCheckFailed);
  });
}

inline int cmd_descend(const Options& o, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    const Problem prob = load_problem(o.problem);
    DescentConfig cfg;
    cfg.max_iter = o.max_iter;
    cfg.step0 = o.step0;
    if (o.tol) cfg.grad_tol = *o.tol;
    if (o.step_rule == "fixed") cfg.step_rule = StepRule::Fixed;
    else if (o.step_rule == "bb") cfg.step_rule = StepRule::BarzilaiBorwein;
    else fail(ErrorCode::SchemaError, "--step-rule must be 'bb' or 'fixed'");

    const Controller init = o.controller.empty()
                                ? random_stabilizing_init(prob.plant, o.seed)
                                : detail::resolve_controller(o, prob);
    const DescentTrace trace = descend(prob.plant, prob.X, init, cfg);

    std::ostringstream csv;
    csv << "iter,J,grad_norm,step\n";
    for (std::size_t i = 0; i < trace.iterates.size(); ++i) {
      const auto& it = trace.iterates[i];
      csv << i << ',' << format_number(it.J) << ',' << format_number(it.grad_norm) << ','
          << format_number(it.step) << '\n';
    }
    const auto& last = trace.final();
    const double final_J = evaluate(prob.plant, last.controller, prob.X).J;

    std::optional<StationaryCertificate> cert;
    try {
      cert = stationary_candidate(prob.plant, prob.X);
    } catch (const Error&) {
    }
    const double distance = cert ? (last.controller - cert->K_star).norm() : 0.0;

    std::ostringstream report;
    if (o.json) {
      json j = {{"status", std::string(to_string(trace.status))},
                {"iterations", trace.iterations()},
                {"J", final_J},
                {"grad_norm", last.grad_norm},
                {"controller", controller_to_json(last.controller)}};
      if (cert) {
        j["distance_to_stationary"] = distance;
        j["J_stationary"] = cert->J;
      }
      report << j.dump(2) << '\n';
    } else {
      report << "status = " << to_string(trace.status) << '\n'
             << "iterations = " << trace.iterations() << '\n'
             << "J = " << format_number(final_J) << '\n'
             << "grad_norm = " << format_number(last.grad_norm) << '\n';
      detail::print_controller(report, "K", last.controller);
      if (cert) {
        report << "distance_to_stationary = " << format_number(distance) << '\n'
               << "J_stationary = " << format_number(cert->J) << '\n';
      }
    }
    if (o.out.empty()) {
      out << csv.str() << report.str();
    } else {
      detail::emit(o, out, csv.str());
      out << report.str();
    }
    return int(trace.status == DescentStatus::Converged ? kOk : kCheckFailed);
  });
}

/// Parses argv and dispatches. `gradient` replaces the analytic gradient in
/// `gradcheck` (used by tests as a negative control).
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
               const GradientFn& gradient = default_gradient) {
  CLI::App app{"Dynamic output-feedback LQR: cost, gradients, similarity orbits, "
               "stationary points"};
  app.name("dlqr");
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--problem", o.problem, "problem JSON file")->required();
    sub->add_option("--out", o.out, "output file");
    sub->add_flag("--json", o.json, "machine-readable output");
    sub->add_option("--seed", o.seed, "random seed");
    sub->add_option("--tol", o.tol, "command tolerance");
  };
  auto* eval = app.add_subcommand("eval", "evaluate J(K) and its certificates");
  common(eval);
  eval->add_option("--controller", o.controller, "controller JSON file");

  auto* stat = app.add_subcommand("stationary", "closed-form observable stationary point");
  common(stat);

  auto* land = app.add_subcommand("landscape", "cost over a 1-2 axis grid or an orbit");
  common(land);
  land->add_option("--controller", o.controller, "base controller JSON file");
  land->add_option("--axis", o.axes, "PARAM=min:max:steps, e.g. B_K[0,0]=0:8:81");
  land->add_option("--fix", o.fixed, "PARAM=value");
  land->add_option("--orbit", o.orbit, "tmin:tmax:steps along T = t I");
  land->add_option("--threads", o.threads, "worker threads (0 = hardware)");

  auto* grad = app.add_subcommand("gradcheck", "analytic vs finite-difference gradient");
  common(grad);
  grad->add_option("--controller", o.controller, "extra controller JSON file");
  grad->add_option("--trials", o.trials, "random stabilizing controllers to check");

  auto* desc = app.add_subcommand("descend", "stability-safeguarded gradient descent");
  common(desc);
  desc->add_option("--controller", o.controller, "initial controller JSON file");
  desc->add_option("--max-iter", o.max_iter, "iteration budget");
  desc->add_option("--step0", o.step0, "initial trial step");
  desc->add_option("--step-rule", o.step_rule, "bb | fixed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }

  if (*eval) return cmd_eval(o, out, err);
  if (*stat) return cmd_stationary(o, out, err);
  if (*land) return cmd_landscape(o, out, err);
  if (*grad) return cmd_gradcheck(o, out, err, gradient);
  return cmd_descend(o, out, err);
}

}  // namespace dlqr::cli
