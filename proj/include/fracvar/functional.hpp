#pragma once

// Discrete Bolza functional and its sensitivities.
//
// The control u is piecewise constant on cells. The state x = y + I^alpha[u]
// is integrated exactly, the Lagrangian is sampled at cell midpoints and the
// weight (b - s)^(beta-1) / Gamma(beta) is integrated exactly on each cell, so
// the cost is well defined for every beta > 0. The Gateaux differentials
// below are the exact first and second derivatives of this discrete
// functional.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fracvar/convex.hpp"
#include "fracvar/errors.hpp"
#include "fracvar/expr.hpp"
#include "fracvar/frac_ops.hpp"
#include "fracvar/gamma.hpp"
#include "fracvar/grid.hpp"
#include "fracvar/model.hpp"

namespace fracvar {

namespace detail {

inline std::span<const double> row_span(const RowMat& m, Eigen::Index r) {
  return {m.data() + r * m.cols(), static_cast<std::size_t>(m.cols())};
}
inline std::span<const double> vec_span(const Vec& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

inline Vec eval_vec(const std::vector<Expr>& es, const Env& env) {
  Vec out(static_cast<Eigen::Index>(es.size()));
  for (std::size_t i = 0; i < es.size(); ++i) out[static_cast<Eigen::Index>(i)] = es[i].evaluate(env);
  return out;
}

inline Mat eval_mat(const SymbolicDerivatives::ExprMat& es, const Env& env) {
  const auto r = static_cast<Eigen::Index>(es.size());
  const auto c = r == 0 ? 0 : static_cast<Eigen::Index>(es[0].size());
  Mat out(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index k = 0; k < c; ++k) {
      out(i, k) = es[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)].evaluate(env);
    }
  }
  return out;
}

/// Cell integrals of (b - s)^(beta-1) / Gamma(beta).
inline std::vector<double> cost_moments(const Grid& grid, double beta) {
  const std::size_t n = grid.n_cells();
  const FracWeights w(beta, grid.step(), n);
  std::vector<double> c(n);
  for (std::size_t m = 0; m < n; ++m) c[m] = w[n - 1 - m];
  return c;
}

/// Final state x(b) = y + I^alpha[u](b).
inline Vec final_state(const GridFn& u, const Vec& y, double alpha) {
  const Grid& g = u.grid();
  const std::size_t n = g.n_cells();
  const FracWeights w(alpha, g.step(), n);
  Vec xb = y;
  for (std::size_t m = 0; m < n; ++m) xb += w[n - 1 - m] * u.cell(m);
  return xb;
}

inline void check_traj(const ProblemSpec& spec, const TrajectoryPair& traj, const char* who) {
  if (!(traj.grid() == spec.grid())) throw DimensionError(std::string(who) + ": trajectory grid differs from problem grid");
  if (traj.dim() != spec.dim()) throw DimensionError(std::string(who) + ": trajectory dim differs from problem dim");
}

inline Env endpoint_env(const Vec& xa, const Vec& xb) {
  Env e;
  e.xa = vec_span(xa);
  e.xb = vec_span(xb);
  return e;
}

/// Everything the functional needs about a trajectory, sampled once.
struct Sampled {
  const ProblemSpec* spec;
  RowMat xmid;                // state at cell midpoints
  Vec xa, xb;                 // endpoint states
  std::vector<double> cost;   // cell weights of the Lagrange term

  Sampled(const ProblemSpec& s, const TrajectoryPair& traj)
      : spec(&s),
        xmid(midpoint_trajectory(traj.u, traj.y, s.alpha())),
        xa(traj.y),
        xb(final_state(traj.u, traj.y, s.alpha())),
        cost(cost_moments(s.grid(), s.beta())) {}

  Env cell_env(const TrajectoryPair& traj, std::size_t m) const {
    Env e;
    e.t = spec->grid().midpoint(m);
    e.x = row_span(xmid, static_cast<Eigen::Index>(m));
    e.u = row_span(traj.u.values(), static_cast<Eigen::Index>(m));
    return e;
  }
  Env ends() const { return endpoint_env(xa, xb); }
};

/// Midpoint values of a variation eta = eta_a + I^alpha[nu] and its endpoint.
struct SampledVariation {
  RowMat mid;
  Vec at_a, at_b;
  SampledVariation(const TrajectoryPair& eta, double alpha)
      : mid(midpoint_trajectory(eta.u, eta.y, alpha)), at_a(eta.y), at_b(final_state(eta.u, eta.y, alpha)) {}
};

}  // namespace detail

/// phi(x(a), x(b)) + I^beta_{a+}[L(x, u, .)](b).
inline double bolza_eval(const ProblemSpec& spec, const TrajectoryPair& traj) {
  detail::check_traj(spec, traj, "bolza_eval");
  const detail::Sampled s(spec, traj);
  double lagrange = 0.0;
  for (std::size_t m = 0; m < spec.grid().n_cells(); ++m) {
    lagrange += s.cost[m] * spec.lagrangian().evaluate(s.cell_env(traj, m));
  }
  return spec.phi().evaluate(s.ends()) + lagrange;
}

/// First Gateaux differential along eta, given as (cD^alpha eta, eta(a)).
inline double gateaux_first(const ProblemSpec& spec, const TrajectoryPair& traj, const TrajectoryPair& eta) {
  detail::check_traj(spec, traj, "gateaux_first");
  detail::check_traj(spec, eta, "gateaux_first");
  const auto& d = spec.derivatives();
  const detail::Sampled s(spec, traj);
  const detail::SampledVariation e(eta, spec.alpha());
  const Env ends = s.ends();
  double out = detail::eval_vec(d.phi_xa, ends).dot(e.at_a) + detail::eval_vec(d.phi_xb, ends).dot(e.at_b);
  double integral = 0.0;
  for (std::size_t m = 0; m < spec.grid().n_cells(); ++m) {
    const Env env = s.cell_env(traj, m);
    const double lx = detail::eval_vec(d.L_x, env).dot(e.mid.row(static_cast<Eigen::Index>(m)).transpose());
    const double lu = detail::eval_vec(d.L_u, env).dot(eta.u.cell(m));
    integral += s.cost[m] * (lx + lu);
  }
  return out + integral;
}

/// Endpoint blocks A, B, C of phi and per-cell blocks P, Q, R of L.
struct SecondDiffData {
  Mat A, B, C;
  std::vector<Mat> P, Q, R;
};

inline SecondDiffData second_diff_data(const ProblemSpec& spec, const TrajectoryPair& traj) {
  detail::check_traj(spec, traj, "second_diff_data");
  const auto& d = spec.derivatives();
  const detail::Sampled s(spec, traj);
  const Env ends = s.ends();
  SecondDiffData out;
  out.A = detail::eval_mat(d.phi_aa, ends);
  out.B = detail::eval_mat(d.phi_ab, ends);
  out.C = detail::eval_mat(d.phi_bb, ends);
  for (std::size_t m = 0; m < spec.grid().n_cells(); ++m) {
    const Env env = s.cell_env(traj, m);
    out.P.push_back(detail::eval_mat(d.L_xx, env));
    out.Q.push_back(detail::eval_mat(d.L_xu, env));
    out.R.push_back(detail::eval_mat(d.L_uu, env));
  }
  return out;
}

/// Second Gateaux differential (quadratic form) along eta.
inline double gateaux_second(const ProblemSpec& spec, const TrajectoryPair& traj, const TrajectoryPair& eta) {
  detail::check_traj(spec, eta, "gateaux_second");
  const SecondDiffData sd = second_diff_data(spec, traj);
  const detail::SampledVariation e(eta, spec.alpha());
  const std::vector<double> cost = detail::cost_moments(spec.grid(), spec.beta());
  double out = e.at_a.dot(sd.A * e.at_a) + 2.0 * e.at_a.dot(sd.B * e.at_b) + e.at_b.dot(sd.C * e.at_b);
  double integral = 0.0;
  for (std::size_t m = 0; m < spec.grid().n_cells(); ++m) {
    const Vec em = e.mid.row(static_cast<Eigen::Index>(m)).transpose();
    const Vec nu = eta.u.cell(m);
    integral += cost[m] * (em.dot(sd.P[m] * em) + 2.0 * em.dot(sd.Q[m] * nu) + nu.dot(sd.R[m] * nu));
  }
  return out + integral;
}

/// y-sensitivity: the first differential along the constant variation y_dir.
inline double y_sensitivity(const ProblemSpec& spec, const TrajectoryPair& traj, const Vec& y_dir) {
  if (static_cast<std::size_t>(y_dir.size()) != spec.dim()) throw DimensionError("y_sensitivity: dim(y_dir) != dim");
  return gateaux_first(spec, traj, TrajectoryPair(GridFn(spec.grid(), spec.dim()), y_dir));
}

// ---------------------------------------------------------------------------
// Needle perturbations

struct NeedleParams {
  double tau = 0.0;
  double h = 0.0;
  Vec v;
};

namespace detail {
inline std::pair<std::size_t, std::size_t> needle_cells(const Grid& g, const NeedleParams& p) {
  const long k0 = g.node_index(p.tau);
  const long k1 = g.node_index(p.tau + p.h);
  if (k0 < 0 || k1 < 0) throw DomainError("needle window endpoints must be grid nodes");
  if (!(p.h > 0.0) || k1 <= k0) throw DomainError("needle window must have positive length");
  return {static_cast<std::size_t>(k0), static_cast<std::size_t>(k1)};
}
}  // namespace detail

/// u with the window [tau, tau + h) overwritten by v.
inline GridFn needle_apply(const GridFn& u, const NeedleParams& p) {
  if (static_cast<std::size_t>(p.v.size()) != u.dim()) throw DimensionError("needle_apply: dim(v) != dim(u)");
  const auto [k0, k1] = detail::needle_cells(u.grid(), p);
  GridFn out = u;
  for (std::size_t m = k0; m < k1; ++m) out.set_row(m, p.v);
  if (k1 == u.grid().n_cells()) out.set_row(k1, p.v);
  return out;
}

/// Limit of (Phi(u^(tau,v)(., h), y) - Phi(u, y)) / h as h -> 0+.
inline double needle_sensitivity(const ProblemSpec& spec, const TrajectoryPair& traj, double tau, const Vec& v) {
  detail::check_traj(spec, traj, "needle_sensitivity");
  const Grid& g = spec.grid();
  const long k = g.node_index(tau);
  if (k <= 0 || k >= static_cast<long>(g.n_cells())) throw DomainError("needle_sensitivity: tau must be an interior node");
  if (static_cast<std::size_t>(v.size()) != spec.dim()) throw DimensionError("needle_sensitivity: dim(v) != dim");
  const auto kk = static_cast<std::size_t>(k);
  const double alpha = spec.alpha(), beta = spec.beta();
  const auto& d = spec.derivatives();
  const detail::Sampled s(spec, traj);

  const GridFn x = reconstruct_trajectory(traj.u, traj.y, alpha);
  const Vec x_tau = x.row(kk);
  const Vec u_tau = traj.u.row(kk);
  const Vec dv = v - u_tau;
  const double t = g.node(kk);
  const double rest = g.b() - t;

  Env at_v, at_u;
  at_v.t = at_u.t = t;
  at_v.x = at_u.x = detail::vec_span(x_tau);
  at_v.u = detail::vec_span(v);
  at_u.u = detail::vec_span(u_tau);
  const double jump = spec.lagrangian().evaluate(at_v) - spec.lagrangian().evaluate(at_u);

  // I^alpha_{b-}[(b - .)^(beta-1)/Gamma(beta) dL/dx](tau), with the weight
  // replaced by its exact cell average.
  RowMat weighted(g.n_cells(), spec.dim());
  for (std::size_t m = 0; m < g.n_cells(); ++m) {
    weighted.row(static_cast<Eigen::Index>(m)) =
        (s.cost[m] / g.step()) * detail::eval_vec(d.L_x, s.cell_env(traj, m)).transpose();
  }
  const Vec adj = detail::right_integral_at(g, weighted, alpha, t);

  const Vec phi_b = detail::eval_vec(d.phi_xb, s.ends());
  return std::pow(rest, beta - 1.0) * inv_gamma(beta) * jump +
         (std::pow(rest, alpha - 1.0) * inv_gamma(alpha) * phi_b + adj).dot(dv);
}

struct NeedleBoundCheck {
  bool passed = false;
  double sup_deviation = 0.0;     // sup_t |x_needle(t) - x(t)|
  double sup_bound = 0.0;         // 2 R h^alpha / Gamma(alpha + 1)
  double worst_pointwise = 0.0;   // max over t > tau + h of lhs - rhs of the pointwise bound
};

/// Verifies the uniform and pointwise needle bounds on the grid.
inline NeedleBoundCheck needle_bounds_check(const ProblemSpec& spec, const TrajectoryPair& traj,
                                            const NeedleParams& p, double R) {
  detail::check_traj(spec, traj, "needle_bounds_check");
  const Grid& g = spec.grid();
  const double alpha = spec.alpha();
  for (std::size_t k = 0; k < g.n_nodes(); ++k) {
    if (traj.u.row(k).norm() > R * (1.0 + 1e-12)) throw DomainError("needle_bounds_check: |u| exceeds R");
  }
  if (p.v.norm() > R * (1.0 + 1e-12)) throw DomainError("needle_bounds_check: |v| exceeds R");
  const auto [k0, k1] = detail::needle_cells(g, p);

  const GridFn x = reconstruct_trajectory(traj.u, traj.y, alpha);
  const GridFn xn = reconstruct_trajectory(needle_apply(traj.u, p), traj.y, alpha);
  NeedleBoundCheck out;
  out.sup_bound = 2.0 * R * std::pow(p.h, alpha) * inv_gamma(alpha + 1.0);
  Vec mean_u = Vec::Zero(static_cast<Eigen::Index>(spec.dim()));
  for (std::size_t m = k0; m < k1; ++m) mean_u += traj.u.cell(m);
  mean_u /= static_cast<double>(k1 - k0);
  const Vec u_tau = traj.u.row(k0);
  const double ga = inv_gamma(alpha);

  out.worst_pointwise = -std::numeric_limits<double>::infinity();
  bool ok = true;
  for (std::size_t k = 0; k < g.n_nodes(); ++k) {
    const Vec dx = xn.row(k) - x.row(k);
    out.sup_deviation = std::max(out.sup_deviation, dx.norm());
    if (k <= k1) continue;
    const double t = g.node(k);
    const double kern = std::pow(t - p.tau, alpha - 1.0) * ga;
    const double lhs = (dx / p.h - kern * (p.v - u_tau)).norm();
    const double rhs = kern * (mean_u - u_tau).norm() +
                       2.0 * R * ga * (std::pow(t - (p.tau + p.h), alpha - 1.0) - std::pow(t - p.tau, alpha - 1.0));
    const double slack = 1e-9 * (1.0 + rhs + dx.norm() / p.h);
    out.worst_pointwise = std::max(out.worst_pointwise, lhs - rhs);
    ok = ok && lhs <= rhs + slack;
  }
  ok = ok && out.sup_deviation <= out.sup_bound * (1.0 + 1e-12) + 1e-14;
  out.passed = ok;
  return out;
}

/// sqrt(((Phi - ref + eps)^+)^2 + d_S^2(g(x(a), x(b)))); free problems have d_S = 0.
inline double penalized_value(const ProblemSpec& spec, const TrajectoryPair& traj, double ref_value, double epsilon) {
  if (!(epsilon > 0.0)) throw DomainError("penalized_value: epsilon must be positive");
  const double gap = std::max(bolza_eval(spec, traj) - ref_value + epsilon, 0.0);
  double d2 = 0.0;
  if (const auto& c = spec.constraint()) {
    const Vec xb = detail::final_state(traj.u, traj.y, spec.alpha());
    d2 = dist_sq(c->set, detail::eval_vec(c->g, detail::endpoint_env(traj.y, xb)));
  }
  return std::sqrt(gap * gap + d2);
}

}  // namespace fracvar
