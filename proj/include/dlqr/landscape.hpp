#pragma once

// Cost landscapes over one or two controller entries, or along the scalar
// similarity orbit T = t I of a base controller.

#include <algorithm>
#include <array>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "dlqr/cost.hpp"
#include "dlqr/similarity.hpp"

namespace dlqr {

enum class Block { A_K, B_K, C_K };

/// One scalar entry of a controller, written "B_K[0,0]" or "B_K" for [0,0].
struct ParamRef {
  Block block = Block::A_K;
  Eigen::Index row = 0;
  Eigen::Index col = 0;

  static ParamRef parse(std::string_view text) {
    ParamRef ref;
    const std::string_view head = text.substr(0, 3);
    if (head == "A_K") ref.block = Block::A_K;
    else if (head == "B_K") ref.block = Block::B_K;
    else if (head == "C_K") ref.block = Block::C_K;
    else fail(ErrorCode::SchemaError, "unknown controller parameter '" + std::string(text) + "'");
    std::string_view rest = text.substr(3);
    if (rest.empty()) return ref;
    int r = -1, c = -1;
    char tail = 0;
    const std::string s(rest);
    if (std::sscanf(s.c_str(), "[%d,%d]%c", &r, &c, &tail) != 2 || r < 0 || c < 0) {
      fail(ErrorCode::SchemaError, "malformed parameter index '" + std::string(text) + "'");
    }
    ref.row = r;
    ref.col = c;
    return ref;
  }

  std::string name() const {
    static constexpr std::array<const char*, 3> names{"A_K", "B_K", "C_K"};
    return std::string(names[static_cast<int>(block)]) + "[" + std::to_string(row) +
           "," + std::to_string(col) + "]";
  }

  double& in(Controller& k) const {
    Matrix& M = block == Block::A_K ? k.A_K : block == Block::B_K ? k.B_K : k.C_K;
    require(row < M.rows() && col < M.cols(), ErrorCode::SchemaError,
            "parameter " + name() + " is out of range");
    return M(row, col);
  }
};

struct SweepAxis {
  ParamRef param;
  double min = 0;
  double max = 1;
  int steps = 2;

  double value(int i) const {
    if (i == steps - 1) return max;
    return min + (max - min) * static_cast<double>(i) / (steps - 1);
  }
};

struct OrbitRange {
  double min = 0.5;
  double max = 8;
  int steps = 2;
};

struct SweepSpec {
  Controller base;
  std::vector<std::pair<ParamRef, double>> fixed;
  std::vector<SweepAxis> axes;
  // Orbit mode: evaluate T_{tI}(base) for t on the range; axes must be empty.
  std::optional<OrbitRange> orbit;

  void validate() const {
    auto check_range = [](double lo, double hi, int steps) {
      require(steps >= 2, ErrorCode::SchemaError, "sweep: steps must be >= 2");
      require(lo < hi, ErrorCode::SchemaError, "sweep: min must be < max");
    };
    if (orbit) {
      require(axes.empty(), ErrorCode::SchemaError,
              "sweep: orbit mode cannot be combined with axes");
      check_range(orbit->min, orbit->max, orbit->steps);
      for (int i = 0; i < orbit->steps; ++i) {
        const double t = SweepAxis{{}, orbit->min, orbit->max, orbit->steps}.value(i);
        require(t != 0, ErrorCode::SchemaError, "sweep: orbit range must exclude T = 0");
      }
    } else {
      require(!axes.empty() && axes.size() <= 2, ErrorCode::SchemaError,
              "sweep: between one and two axes are required");
      for (const auto& a : axes) check_range(a.min, a.max, a.steps);
    }
  }

  std::size_t cell_count() const {
    if (orbit) return static_cast<std::size_t>(orbit->steps);
    std::size_t count = 1;
    for (const auto& a : axes) count *= static_cast<std::size_t>(a.steps);
    return count;
  }
};

struct SweepCell {
  std::array<int, 2> index{0, 0};
  double axis1 = 0;
  std::optional<double> axis2;
  bool stabilizing = false;
  double rho = 0;
  std::optional<double> J;
};

namespace detail {

inline SweepCell evaluate_cell(const Plant& p, const SecondMoment& X,
                               const SweepSpec& spec, const Controller& base,
                               std::size_t flat, const SolverConfig& cfg) {
  SweepCell cell;
  Controller k = base;
  if (spec.orbit) {
    const SweepAxis axis{{}, spec.orbit->min, spec.orbit->max, spec.orbit->steps};
    cell.index = {static_cast<int>(flat), 0};
    cell.axis1 = axis.value(cell.index[0]);
    k = apply(base, Transform(Matrix::Identity(p.n(), p.n()) * cell.axis1));
  } else {
    const int inner = spec.axes.size() == 2 ? spec.axes[1].steps : 1;
    cell.index = {static_cast<int>(flat / inner), static_cast<int>(flat % inner)};
    cell.axis1 = spec.axes[0].value(cell.index[0]);
    spec.axes[0].param.in(k) = cell.axis1;
    if (spec.axes.size() == 2) {
      cell.axis2 = spec.axes[1].value(cell.index[1]);
      spec.axes[1].param.in(k) = *cell.axis2;
    }
  }
  cell.rho = closed_loop_spectral_radius(p, k);
  cell.stabilizing = cell.rho < 1 - cfg.stability_margin;
  if (cell.stabilizing) {
    try {
      cell.J = evaluate(p, k, X, cfg).J;
    } catch (const Error&) {
      cell.stabilizing = false;
    }
  }
  return cell;
}

}  // namespace detail

/// Evaluates every grid cell, in parallel when `threads` > 1. The result is
/// ordered by grid index (row-major over axis1, axis2) for any thread count.
inline std::vector<SweepCell> run_sweep(const Plant& p, const SecondMoment& X,
                                        const SweepSpec& spec, unsigned threads = 0,
                                        const SolverConfig& cfg = {}) {
  spec.validate();
  Controller base = spec.base;
  check_dimensions(p, base);
  for (const auto& [ref, value] : spec.fixed) ref.in(base) = value;
  if (!spec.orbit) {
    Controller probe = base;
    for (const auto& a : spec.axes) a.param.in(probe);  // range check
  }

  const std::size_t count = spec.cell_count();
  std::vector<SweepCell> cells(count);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  auto work = [&](unsigned worker) {
    for (std::size_t i = worker; i < count; i += threads)
      cells[i] = detail::evaluate_cell(p, X, spec, base, i, cfg);
  };
  if (threads <= 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  return cells;
}

/// %.17g: enough digits to reproduce every double bit for bit.
inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Header `axis1,axis2,J,stabilizing,rho`; J is empty on non-stabilizing
/// cells and axis2 is empty on one-axis sweeps.
inline void write_landscape_csv(std::ostream& os, const std::vector<SweepCell>& cells) {
  os << "axis1,axis2,J,stabilizing,rho\n";
  for (const auto& c : cells) {
    os << format_number(c.axis1) << ',';
    if (c.axis2) os << format_number(*c.axis2);
    os << ',';
    if (c.J) os << format_number(*c.J);
    os << ',' << (c.stabilizing ? 1 : 0) << ',' << format_number(c.rho) << '\n';
  }
}

/// The stabilizing cell with the lowest cost, if any.
inline std::optional<SweepCell> grid_minimum(const std::vector<SweepCell>& cells) {
  std::optional<SweepCell> best;
  for (const auto& c : cells) {
    if (c.J && (!best || *c.J < *best->J)) best = c;
  }
  return best;
}

}  // namespace dlqr
