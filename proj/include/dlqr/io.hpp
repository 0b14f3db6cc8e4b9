#pragma once

// JSON problem files.
//
//   {"A": M, "B": M, "C": M, "Q": M, "R": M, "X": M,
//    "seed_controller": {"A_K": M, "B_K": M, "C_K": M}}    (optional)
//
// where M = {"rows": int, "cols": int, "data": [row-major reals]}. Unknown
// keys are rejected at every level.

#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "dlqr/model.hpp"

namespace dlqr {

using json = nlohmann::json;

namespace detail {

inline void expect_keys(const json& j, std::initializer_list<const char*> required,
                        std::initializer_list<const char*> optional,
                        const std::string& where) {
  require(j.is_object(), ErrorCode::SchemaError, where + ": expected an object");
  for (const char* key : required) {
    require(j.contains(key), ErrorCode::SchemaError,
            where + ": missing key '" + key + "'");
  }
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* k : required) known = known || key == k;
    for (const char* k : optional) known = known || key == k;
    require(known, ErrorCode::SchemaError, where + ": unknown key '" + key + "'");
  }
}

}  // namespace detail

inline Matrix matrix_from_json(const json& j, const std::string& where) {
  detail::expect_keys(j, {"rows", "cols", "data"}, {}, where);
  require(j["rows"].is_number_integer() && j["cols"].is_number_integer(),
          ErrorCode::SchemaError, where + ": rows and cols must be integers");
  const auto rows = j["rows"].get<long long>();
  const auto cols = j["cols"].get<long long>();
  require(rows >= 1 && cols >= 1, ErrorCode::SchemaError,
          where + ": rows and cols must be positive");
  const json& data = j["data"];
  require(data.is_array() && static_cast<long long>(data.size()) == rows * cols,
          ErrorCode::SchemaError, where + ": data must hold rows*cols numbers");
  Matrix M(rows, cols);
  for (long long i = 0; i < rows; ++i) {
    for (long long c = 0; c < cols; ++c) {
      const json& v = data[static_cast<std::size_t>(i * cols + c)];
      require(v.is_number(), ErrorCode::SchemaError, where + ": data must be numeric");
      M(i, c) = v.get<double>();
    }
  }
  require(M.allFinite(), ErrorCode::SchemaError, where + ": entries must be finite");
  return M;
}

inline json matrix_to_json(const Matrix& M) {
  json data = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index c = 0; c < M.cols(); ++c) data.push_back(M(i, c));
  return {{"rows", M.rows()}, {"cols", M.cols()}, {"data", std::move(data)}};
}

inline Controller controller_from_json(const json& j, const std::string& where = "controller") {
  detail::expect_keys(j, {"A_K", "B_K", "C_K"}, {}, where);
  return {matrix_from_json(j["A_K"], where + ".A_K"),
          matrix_from_json(j["B_K"], where + ".B_K"),
          matrix_from_json(j["C_K"], where + ".C_K")};
}

inline json controller_to_json(const Controller& k) {
  return {{"A_K", matrix_to_json(k.A_K)},
          {"B_K", matrix_to_json(k.B_K)},
          {"C_K", matrix_to_json(k.C_K)}};
}

struct Problem {
  Plant plant;
  SecondMoment X;
  std::optional<Controller> seed_controller;
};

inline Problem problem_from_json(const json& j) {
  detail::expect_keys(j, {"A", "B", "C", "Q", "R", "X"}, {"seed_controller"}, "problem");
  Plant plant(matrix_from_json(j["A"], "A"), matrix_from_json(j["B"], "B"),
              matrix_from_json(j["C"], "C"), matrix_from_json(j["Q"], "Q"),
              matrix_from_json(j["R"], "R"));
  SecondMoment X(matrix_from_json(j["X"], "X"));
  require(X.n() == plant.n(), ErrorCode::DimensionMismatch, "problem: X must be 2n x 2n");
  std::optional<Controller> seed;
  if (j.contains("seed_controller")) {
    seed = controller_from_json(j["seed_controller"], "seed_controller");
    check_dimensions(plant, *seed);
  }
  return {std::move(plant), std::move(X), std::move(seed)};
}

inline json problem_to_json(const Problem& p) {
  json j = {{"A", matrix_to_json(p.plant.A())}, {"B", matrix_to_json(p.plant.B())},
            {"C", matrix_to_json(p.plant.C())}, {"Q", matrix_to_json(p.plant.Q())},
            {"R", matrix_to_json(p.plant.R())}, {"X", matrix_to_json(p.X.matrix())}};
  if (p.seed_controller) j["seed_controller"] = controller_to_json(*p.seed_controller);
  return j;
}

inline json parse_json_text(const std::string& text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::SchemaError, where + ": " + e.what());
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::SchemaError, "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json_text(ss.str(), path);
}

inline Problem load_problem(const std::string& path) {
  return problem_from_json(read_json_file(path));
}

}  // namespace dlqr
