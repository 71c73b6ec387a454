#pragma once

// Problem specs and trajectories shared by the unit and acceptance tests.

#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <string>

#include "fracvar/convex.hpp"
#include "fracvar/model.hpp"
#include "test_support.hpp"

namespace fracvar::testing {

/// phi = x(b), L = (x^2 + u^2)/2 on [0, 1].
inline ProblemSpec classical(double alpha = 1.0, std::size_t n_cells = 512, double beta = 1.0,
                             std::optional<Constraint> c = std::nullopt) {
  return ProblemSpec::from_strings(alpha, beta, Grid(0.0, 1.0, n_cells), 1, "xb1", "0.5*(x1^2+u1^2)", std::move(c));
}

/// Minimizer of the classical problem: x = -cosh(t)/sinh(1).
inline double classical_x(double t) { return -std::cosh(t) / std::sinh(1.0); }
inline double classical_u(double t) { return -std::sinh(t) / std::sinh(1.0); }
inline double classical_value() { return -0.5 * std::cosh(1.0) / std::sinh(1.0); }

inline TrajectoryPair classical_optimum(const Grid& g) {
  return TrajectoryPair(GridFn::sample(g, 1, [](double t) { return Vec::Constant(1, classical_u(t)); }),
                        Vec::Constant(1, classical_x(0.0)));
}

/// x = t: u = 1, y = 0.
inline TrajectoryPair identity_path(const Grid& g) {
  return TrajectoryPair(GridFn::constant(g, Vec::Ones(1)), Vec::Zero(1));
}

inline std::string coef(double c) {
  std::ostringstream os;
  os.precision(17);
  os << "(" << c << ")";
  return os.str();
}

/// Quadratic form 0.5 z^T M z + b^T z in the named variables; M = A^T A + shift I
/// when `convex`, otherwise a random symmetric matrix.
inline std::string quadratic_form(std::mt19937_64& rng, const std::vector<std::string>& z, bool convex,
                                  double shift = 0.1) {
  std::normal_distribution<double> nd(0.0, 0.5);
  const auto n = static_cast<Eigen::Index>(z.size());
  Mat A(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) A(i, j) = nd(rng);
  }
  const Mat M = convex ? Mat(A.transpose() * A + shift * Mat::Identity(n, n)) : Mat(A + A.transpose());
  std::string out = "0";
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto si = static_cast<std::size_t>(i);
    out += " + 0.5*" + coef(M(i, i)) + "*" + z[si] + "^2";
    for (Eigen::Index j = i + 1; j < n; ++j) out += " + " + coef(M(i, j)) + "*" + z[si] + "*" + z[static_cast<std::size_t>(j)];
    out += " + " + coef(nd(rng)) + "*" + z[si];
  }
  return out;
}

/// Random quadratic Bolza problem of dimension `dim`: phi quadratic in
/// (xa, xb), L quadratic in (x, u) plus t-dependent linear terms.
inline ProblemSpec random_quadratic_spec(std::mt19937_64& rng, double alpha, double beta, const Grid& g,
                                         std::size_t dim = 2, bool convex = true) {
  std::vector<std::string> ends, state;
  for (std::size_t i = 1; i <= dim; ++i) ends.push_back("xa" + std::to_string(i));
  for (std::size_t i = 1; i <= dim; ++i) ends.push_back("xb" + std::to_string(i));
  for (std::size_t i = 1; i <= dim; ++i) state.push_back("x" + std::to_string(i));
  for (std::size_t i = 1; i <= dim; ++i) state.push_back("u" + std::to_string(i));
  std::string L = quadratic_form(rng, state, convex);
  std::normal_distribution<double> nd(0.0, 0.5);
  for (std::size_t i = 1; i <= dim; ++i) L += " + " + coef(nd(rng)) + "*t*x" + std::to_string(i);
  return ProblemSpec::from_strings(alpha, beta, g, dim, quadratic_form(rng, ends, convex), L);
}

/// Smooth random trajectory with controls of size about `scale`.
inline TrajectoryPair random_traj(std::mt19937_64& rng, const Grid& g, std::size_t dim, double scale = 0.5) {
  std::vector<RandomSmooth> f;
  for (std::size_t i = 0; i < dim; ++i) f.emplace_back(rng, 3, scale);
  std::normal_distribution<double> nd(0.0, scale);
  Vec y(static_cast<Eigen::Index>(dim));
  for (auto& yi : y) yi = nd(rng);
  return TrajectoryPair(GridFn::sample(g, dim,
                                       [&](double t) {
                                         Vec v(static_cast<Eigen::Index>(dim));
                                         for (std::size_t i = 0; i < dim; ++i) v[static_cast<Eigen::Index>(i)] = f[i](t);
                                         return v;
                                       }),
                        y);
}

/// Piecewise-constant random variation (rough, unlike random_traj).
inline TrajectoryPair random_variation(std::mt19937_64& rng, const Grid& g, std::size_t dim) {
  std::normal_distribution<double> nd;
  RowMat v(g.n_nodes(), dim);
  for (Eigen::Index k = 0; k < v.rows(); ++k) {
    for (Eigen::Index i = 0; i < v.cols(); ++i) v(k, i) = nd(rng);
  }
  Vec y(static_cast<Eigen::Index>(dim));
  for (auto& yi : y) yi = nd(rng);
  return TrajectoryPair(GridFn(g, std::move(v)), y);
}

/// (u + s*du, y + s*dy).
inline TrajectoryPair shifted(const TrajectoryPair& x, const TrajectoryPair& d, double s) {
  return TrajectoryPair(x.u + s * d.u, x.y + s * d.y);
}

/// Periodic problem with phi = 0, alpha = beta = 1 and extremal
/// x = 1 + cos(2 pi t) + sin(2 pi t); the forcing makes x solve x'' = x - f.
inline ProblemSpec periodic_spec(std::size_t n_cells = 512) {
  const std::string L =
      "0.5*u1^2 + 0.5*x1^2 - x1*(1 + (1 + 4*3.141592653589793^2)*(cos(2*3.141592653589793*t) + "
      "sin(2*3.141592653589793*t)))";
  return ProblemSpec::from_strings(1.0, 1.0, Grid(0.0, 1.0, n_cells), 1, "0", L,
                                   standard_constraint(ConstraintKind::Periodic, 1));
}
inline double periodic_x(double t) { return 1.0 + std::cos(2.0 * kPi * t) + std::sin(2.0 * kPi * t); }
inline double periodic_u(double t) { return 2.0 * kPi * (std::cos(2.0 * kPi * t) - std::sin(2.0 * kPi * t)); }

/// Two-dimensional problem used for needle limits: quadratic in (xa, xb, u),
/// affine in x.  For alpha < 1, terms quadratic in x add h^(2 alpha) and
/// h log h terms to the needle quotient that spoil the extrapolation.
inline ProblemSpec needle_spec(double alpha, double beta, std::size_t n_cells) {
  return ProblemSpec::from_strings(alpha, beta, Grid(0.0, 1.0, n_cells), 2, "(xb1-0.5)^2 + xa2*xb1 + 0.3*xb2^2",
                                   "0.5*u1^2 + u1*u2 + u2^2 + t*u1 + (1+t)*x1 - x2");
}

/// A random set of one of each kind in dimension 3 (products mix kinds).
inline ConvexSet random_set(std::mt19937_64& rng, int kind) {
  std::normal_distribution<double> nd;
  auto rv = [&](int n) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = nd(rng);
    return v;
  };
  switch (kind) {
    case 0: return ConvexSet::whole_space(3);
    case 1: return ConvexSet::singleton(rv(3));
    case 2: {
      Vec lo = rv(3), hi = lo + rv(3).cwiseAbs();
      lo[1] = -std::numeric_limits<double>::infinity();
      return ConvexSet::box(lo, hi);
    }
    case 3: return ConvexSet::ball(rv(3), 0.5 + std::abs(nd(rng)));
    default:
      return ConvexSet::product({ConvexSet::ball(rv(2), 1.0), ConvexSet::box(Vec::Constant(1, 0.0), Vec::Constant(1, std::numeric_limits<double>::infinity()))});
  }
}

/// A random point of S (projection of a random point).
inline Vec random_member(std::mt19937_64& rng, const ConvexSet& s) {
  std::normal_distribution<double> nd(0.0, 3.0);
  Vec z(static_cast<Eigen::Index>(s.dim()));
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = nd(rng);
  return project(s, z);
}

}  // namespace fracvar::testing
