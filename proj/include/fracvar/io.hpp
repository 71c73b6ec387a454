#pragma once

// Problem files (JSON), trajectory files (CSV) and report serialization.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fracvar/conditions.hpp"
#include "fracvar/errors.hpp"
#include "fracvar/model.hpp"
#include "fracvar/solver.hpp"

namespace fracvar::io {

using json = nlohmann::json;

struct LoadedProblem {
  ProblemSpec spec;
  SolverConfig config;
};

namespace detail {

inline const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw InputError(where + ": missing key '" + key + "'");
  return j.at(key);
}

inline double number(const json& j, const std::string& where) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!j.is_number()) throw InputError(where + ": expected a number");
  return j.get<double>();
}

inline Vec vector(const json& j, const std::string& where, double null_value = std::numeric_limits<double>::quiet_NaN()) {
  if (!j.is_array()) throw InputError(where + ": expected an array of numbers");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string w = where + "[" + std::to_string(i) + "]";
    v[static_cast<Eigen::Index>(i)] = j[i].is_null() ? null_value : number(j[i], w);
    if (std::isnan(v[static_cast<Eigen::Index>(i)])) throw InputError(w + ": expected a number");
  }
  return v;
}

inline std::string string(const json& j, const std::string& where) {
  if (!j.is_string()) throw InputError(where + ": expected a string");
  return j.get<std::string>();
}

inline Expr expression(const json& j, const std::string& where, std::size_t dim) {
  const std::string src = string(j, where);
  try {
    return parse_expr(src, dim);
  } catch (const ParseError& e) {
    throw InputError(where + ": " + e.what());
  }
}

}  // namespace detail

/// ConvexSet from a descriptor such as {"type": "box", "lower": [0, null], "upper": [1, 2]}.
/// Box bounds given as null are infinite.
inline ConvexSet parse_set(const json& j, const std::string& where = "set") {
  using namespace detail;
  const std::string type = string(require(j, "type", where), where + ".type");
  if (type == "whole_space") {
    const json& d = require(j, "dim", where);
    if (!d.is_number_unsigned() || d.get<std::size_t>() == 0) throw InputError(where + ".dim: expected a positive integer");
    return ConvexSet::whole_space(d.get<std::size_t>());
  }
  if (type == "singleton") return ConvexSet::singleton(vector(require(j, "point", where), where + ".point"));
  if (type == "box") {
    return ConvexSet::box(vector(require(j, "lower", where), where + ".lower", -std::numeric_limits<double>::infinity()),
                          vector(require(j, "upper", where), where + ".upper", std::numeric_limits<double>::infinity()));
  }
  if (type == "ball") {
    return ConvexSet::ball(vector(require(j, "center", where), where + ".center"),
                           number(require(j, "radius", where), where + ".radius"));
  }
  if (type == "product") {
    const json& parts = require(j, "parts", where);
    if (!parts.is_array() || parts.empty()) throw InputError(where + ".parts: expected a non-empty array");
    std::vector<ConvexSet> out;
    for (std::size_t i = 0; i < parts.size(); ++i) out.push_back(parse_set(parts[i], where + ".parts[" + std::to_string(i) + "]"));
    return ConvexSet::product(std::move(out));
  }
  throw InputError(where + ".type: unknown set type '" + type + "'");
}

inline json set_to_json(const ConvexSet& s) {
  auto arr = [](const Vec& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(std::isfinite(v[i]) ? json(v[i]) : json(nullptr));
    return a;
  };
  return std::visit(
      [&](const auto& sh) -> json {
        using T = std::decay_t<decltype(sh)>;
        if constexpr (std::is_same_v<T, sets::WholeSpace>) {
          return {{"type", "whole_space"}, {"dim", sh.dim}};
        } else if constexpr (std::is_same_v<T, sets::Singleton>) {
          return {{"type", "singleton"}, {"point", arr(sh.point)}};
        } else if constexpr (std::is_same_v<T, sets::Box>) {
          return {{"type", "box"}, {"lower", arr(sh.lower)}, {"upper", arr(sh.upper)}};
        } else if constexpr (std::is_same_v<T, sets::Ball>) {
          return {{"type", "ball"}, {"center", arr(sh.center)}, {"radius", sh.radius}};
        } else {
          json parts = json::array();
          for (const ConvexSet& p : sh.parts) parts.push_back(set_to_json(p));
          return {{"type", "product"}, {"parts", parts}};
        }
      },
      s.shape());
}

inline Constraint parse_constraint(const json& j, std::size_t dim) {
  using namespace detail;
  if (!j.is_object()) throw InputError("constraint: expected an object");
  if (j.contains("kind")) {
    const std::string kind = string(j.at("kind"), "constraint.kind");
    auto endpoint = [&](const char* key) {
      Vec v = vector(require(j, key, "constraint"), std::string("constraint.") + key);
      if (static_cast<std::size_t>(v.size()) != dim) throw InputError(std::string("constraint.") + key + ": expected " + std::to_string(dim) + " entries");
      return v;
    };
    if (kind == "free") return standard_constraint(ConstraintKind::Free, dim);
    if (kind == "fixed_initial") return standard_constraint(ConstraintKind::FixedInitial, dim, endpoint("x_a"));
    if (kind == "fixed_both") return standard_constraint(ConstraintKind::FixedBoth, dim, endpoint("x_a"), endpoint("x_b"));
    if (kind == "periodic") return standard_constraint(ConstraintKind::Periodic, dim);
    if (kind != "custom") throw InputError("constraint.kind: unknown kind '" + kind + "'");
  }
  const json& g = require(j, "g", "constraint");
  if (!g.is_array() || g.empty()) throw InputError("constraint.g: expected a non-empty array of strings");
  Constraint c;
  c.kind = ConstraintKind::Custom;
  for (std::size_t i = 0; i < g.size(); ++i) c.g.push_back(expression(g[i], "constraint.g[" + std::to_string(i) + "]", dim));
  c.set = parse_set(require(j, "set", "constraint"), "constraint.set");
  return c;
}

inline SolverConfig parse_solver(const json& j, SolverConfig cfg) {
  using namespace detail;
  if (!j.is_object()) throw InputError("solver: expected an object");
  auto vec = [&](const char* key) {
    std::vector<double> out;
    const Vec v = vector(j.at(key), std::string("solver.") + key);
    out.assign(v.data(), v.data() + v.size());
    return out;
  };
  if (j.contains("radius")) cfg.radius = number(j.at("radius"), "solver.radius");
  if (j.contains("max_iters")) {
    if (!j.at("max_iters").is_number_integer()) throw InputError("solver.max_iters: expected an integer");
    cfg.max_iters = j.at("max_iters").get<int>();
  }
  if (j.contains("grad_tol")) cfg.grad_tol = number(j.at("grad_tol"), "solver.grad_tol");
  if (j.contains("epsilon_schedule")) cfg.epsilon_schedule = vec("epsilon_schedule");
  if (j.contains("penalty_weights")) cfg.penalty_weights = vec("penalty_weights");
  if (const auto p = cfg.problems(); !p.empty()) throw InputError("solver: " + p.front());
  return cfg;
}

/// Throws InputError listing the first validation failure.
inline void require_valid(const ProblemSpec& spec) {
  const auto v = validate(spec);
  if (v.empty()) return;
  std::string msg = "invalid problem:";
  for (const Violation& e : v) msg += " " + e.path + ": " + e.message + ";";
  msg.pop_back();
  throw InputError(msg);
}

/// Parses and validates a problem document.
inline LoadedProblem parse_problem(const std::string& text) {
  using namespace detail;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError("malformed JSON at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  if (!j.is_object()) throw InputError("problem: expected a JSON object");
  const double alpha = number(require(j, "alpha", "problem"), "alpha");
  const double beta = number(require(j, "beta", "problem"), "beta");
  const Vec interval = vector(require(j, "interval", "problem"), "interval");
  if (interval.size() != 2) throw InputError("interval: expected [a, b]");
  if (!(interval[0] < interval[1])) throw InputError("interval: need a < b");
  const json& d = require(j, "dim", "problem");
  if (!d.is_number_unsigned() || d.get<std::size_t>() == 0) throw InputError("dim: expected a positive integer");
  const auto dim = d.get<std::size_t>();
  const json& grid = require(j, "grid", "problem");
  const json& nc = require(grid, "n_cells", "grid");
  if (!nc.is_number_unsigned()) throw InputError("grid.n_cells: expected a positive integer");

  std::optional<Constraint> constraint;
  if (j.contains("constraint") && !j.at("constraint").is_null()) constraint = parse_constraint(j.at("constraint"), dim);
  try {
    const Grid g(interval[0], interval[1], nc.get<std::size_t>());
    ProblemSpec spec(alpha, beta, g, dim, expression(require(j, "phi", "problem"), "phi", dim),
                     expression(require(j, "lagrangian", "problem"), "lagrangian", dim), std::move(constraint));
    require_valid(spec);
    SolverConfig cfg;
    if (j.contains("solver")) cfg = parse_solver(j.at("solver"), cfg);
    return {std::move(spec), std::move(cfg)};
  } catch (const DomainError& e) {
    throw InputError(e.what());
  } catch (const DimensionError& e) {
    throw InputError(e.what());
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline LoadedProblem load_problem(const std::string& path) { return parse_problem(read_file(path)); }

// ---------------------------------------------------------------------------
// Trajectory CSV

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// "# y = ..." line, header "t,u_1,...,u_n", one row per node.
inline void write_trajectory_csv(std::ostream& out, const TrajectoryPair& traj) {
  out << "# y = ";
  for (Eigen::Index i = 0; i < traj.y.size(); ++i) out << (i ? "," : "") << format_double(traj.y[i]);
  out << "\nt";
  for (std::size_t i = 1; i <= traj.dim(); ++i) out << ",u_" << i;
  out << "\n";
  const Grid& g = traj.grid();
  for (std::size_t k = 0; k < g.n_nodes(); ++k) {
    out << format_double(g.node(k));
    for (std::size_t i = 0; i < traj.dim(); ++i) out << "," << format_double(traj.u(k, i));
    out << "\n";
  }
}

namespace detail {
inline std::vector<double> split_numbers(const std::string& line, std::size_t lineno) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(cell, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
    if (used == 0 || used != cell.size() || !std::isfinite(v)) {
      throw InputError("trajectory line " + std::to_string(lineno) + ": bad number '" + cell + "'");
    }
    out.push_back(v);
  }
  return out;
}
}  // namespace detail

/// Reads a trajectory written by write_trajectory_csv and checks it against the grid.
inline TrajectoryPair read_trajectory_csv(std::istream& in, const Grid& grid, std::size_t dim) {
  std::string line;
  std::size_t lineno = 0;
  std::optional<Vec> y;
  bool header = false;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq != std::string::npos && line.substr(1, eq - 1).find('y') != std::string::npos) {
        const auto v = detail::split_numbers(line.substr(eq + 1), lineno);
        y = Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
      }
      continue;
    }
    if (!header) {
      std::string expect = "t";
      for (std::size_t i = 1; i <= dim; ++i) expect += ",u_" + std::to_string(i);
      if (line != expect) throw InputError("trajectory header must be '" + expect + "'");
      header = true;
      continue;
    }
    rows.push_back(detail::split_numbers(line, lineno));
    if (rows.back().size() != dim + 1) {
      throw InputError("trajectory line " + std::to_string(lineno) + ": expected " + std::to_string(dim + 1) + " columns");
    }
  }
  if (!y) throw InputError("trajectory: missing '# y = ...' line");
  if (static_cast<std::size_t>(y->size()) != dim) throw InputError("trajectory: y has wrong dimension");
  if (!header) throw InputError("trajectory: missing header");
  if (rows.size() != grid.n_nodes()) {
    throw InputError("trajectory: " + std::to_string(rows.size()) + " rows for a grid with " +
                     std::to_string(grid.n_nodes()) + " nodes");
  }
  RowMat u(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
  const double slack = 1e-9 * (grid.b() - grid.a());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (k > 0 && !(rows[k][0] > rows[k - 1][0])) throw InputError("trajectory: t must be strictly increasing");
    if (std::abs(rows[k][0] - grid.node(k)) > slack) throw InputError("trajectory: t column does not match the problem grid");
    for (std::size_t i = 0; i < dim; ++i) u(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = rows[k][i + 1];
  }
  return TrajectoryPair(GridFn(grid, std::move(u)), *y);
}

// ---------------------------------------------------------------------------
// Reports

inline json to_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(to_json(v[i]));
  return a;
}

/// One array per node.
inline json to_json(const GridFn& f) {
  json a = json::array();
  for (std::size_t k = 0; k < f.rows(); ++k) a.push_back(to_json(f.row(k)));
  return a;
}

inline json to_json(const ResidualReport& r) {
  json j;
  j["el_residual_sup"] = to_json(r.el_residual_sup);
  j["el_residual_profile"] = to_json(r.el_residual_profile);
  j["transversality_a"] = to_json(r.transversality_a);
  j["transversality_b"] = to_json(r.transversality_b);
  json leg = json::array();
  for (const auto& e : r.legendre_min_eig_profile) leg.push_back(e ? to_json(*e) : json(nullptr));
  j["legendre_min_eig_profile"] = leg;
  j["legendre_ok"] = r.legendre_ok;
  j["psi"] = r.psi ? to_json(*r.psi) : json(nullptr);
  j["psi_in_cone"] = r.psi_in_cone ? json(*r.psi_in_cone) : json(nullptr);
  j["adjoint_p"] = to_json(r.adjoint_p);
  return j;
}

inline json to_json(const SolveResult& r) {
  json j;
  j["objective"] = to_json(r.objective);
  j["feasibility_distance"] = to_json(r.feasibility_distance);
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["status"] = solve_status_name(r.status);
  j["grad_norm"] = to_json(r.grad_norm);
  j["y"] = to_json(r.traj.y);
  json stages = json::array();
  for (const StageInfo& s : r.stages) {
    stages.push_back({{"penalty_weight", to_json(s.penalty_weight)},
                      {"epsilon", to_json(s.epsilon)},
                      {"iterations", s.iterations},
                      {"grad_norm", to_json(s.grad_norm)},
                      {"feasibility_distance", to_json(s.feasibility_distance)},
                      {"status", solve_status_name(s.status)}});
  }
  j["stages"] = stages;
  j["report"] = to_json(r.report);
  return j;
}

inline json to_json(const NonexistenceDiagnostic& d) {
  return {{"applicable", d.applicable}, {"flag", d.flag}, {"residual", to_json(d.residual)}, {"note", d.note}};
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << text;
  if (!out) throw InputError("write failed for '" + path + "'");
}

}  // namespace fracvar::io
