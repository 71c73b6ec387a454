#pragma once

// Residuals of the first- and second-order necessary conditions, multiplier
// extraction for endpoint constraints, and the memory-rigidity probe.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "fracvar/convex.hpp"
#include "fracvar/errors.hpp"
#include "fracvar/frac_ops.hpp"
#include "fracvar/functional.hpp"
#include "fracvar/gamma.hpp"
#include "fracvar/grid.hpp"
#include "fracvar/model.hpp"

namespace fracvar {

struct ResidualReport {
  double el_residual_sup = 0.0;
  GridFn el_residual_profile;
  double transversality_a = 0.0;
  double transversality_b = 0.0;
  std::vector<std::optional<double>> legendre_min_eig_profile;  // empty entries: node not checked
  bool legendre_ok = true;
  std::optional<Vec> psi;
  std::optional<bool> psi_in_cone;
  GridFn adjoint_p;  // row m: value at the midpoint of cell m; last row repeats
};

namespace detail {

/// Partials of the data along a trajectory.
struct PartialData {
  RowMat weighted_Lu;  // cell m: cell average of (b-s)^(beta-1)/Gamma(beta) times dL/du
  RowMat weighted_Lx;  // same for dL/dx
  RowMat moment_Lx;    // cell m: c_m dL/dx, i.e. the cell integral of the weighted dL/dx
  Vec phi_a, phi_b;
  Mat g_a, g_b;        // empty when the problem has no constraint
  Vec g_value;
};

inline PartialData partial_data(const ProblemSpec& spec, const TrajectoryPair& traj) {
  check_traj(spec, traj, "partial_data");
  const auto& d = spec.derivatives();
  const Sampled s(spec, traj);
  const Grid& g = spec.grid();
  const std::size_t N = g.n_cells();
  const auto n = static_cast<Eigen::Index>(spec.dim());
  PartialData out;
  out.weighted_Lu.resize(static_cast<Eigen::Index>(N), n);
  out.weighted_Lx.resize(static_cast<Eigen::Index>(N), n);
  out.moment_Lx.resize(static_cast<Eigen::Index>(N), n);
  for (std::size_t m = 0; m < N; ++m) {
    const Env env = s.cell_env(traj, m);
    const auto r = static_cast<Eigen::Index>(m);
    const Vec lu = eval_vec(d.L_u, env);
    const Vec lx = eval_vec(d.L_x, env);
    out.weighted_Lu.row(r) = (s.cost[m] / g.step()) * lu.transpose();
    out.weighted_Lx.row(r) = (s.cost[m] / g.step()) * lx.transpose();
    out.moment_Lx.row(r) = s.cost[m] * lx.transpose();
  }
  const Env ends = s.ends();
  out.phi_a = eval_vec(d.phi_xa, ends);
  out.phi_b = eval_vec(d.phi_xb, ends);
  if (const auto& c = spec.constraint()) {
    out.g_a = eval_mat(d.g_xa, ends);
    out.g_b = eval_mat(d.g_xb, ends);
    out.g_value = eval_vec(c->g, ends);
  }
  return out;
}

/// I^(1-alpha)_{b-}[w] at every node for a cell function w.
/// For alpha = 1 (order 0) node values are linear interpolation of the cell
/// midpoint values, extrapolated at a and b.
inline RowMat endpoint_integral_nodes(const Grid& grid, const RowMat& w, double alpha) {
  const std::size_t N = grid.n_cells();
  RowMat out(static_cast<Eigen::Index>(N + 1), w.cols());
  if (alpha == 1.0) {
    out.row(0) = 1.5 * w.row(0) - 0.5 * w.row(1);
    for (std::size_t k = 1; k < N; ++k) {
      out.row(static_cast<Eigen::Index>(k)) = 0.5 * (w.row(static_cast<Eigen::Index>(k - 1)) + w.row(static_cast<Eigen::Index>(k)));
    }
    out.row(static_cast<Eigen::Index>(N)) = 1.5 * w.row(static_cast<Eigen::Index>(N - 1)) - 0.5 * w.row(static_cast<Eigen::Index>(N - 2));
    return out;
  }
  for (std::size_t k = 0; k < N; ++k) {
    out.row(static_cast<Eigen::Index>(k)) = right_integral_at(grid, w, 1.0 - alpha, grid.node(k)).transpose();
  }
  out.row(static_cast<Eigen::Index>(N)).setZero();
  return out;
}

inline void check_psi(const ProblemSpec& spec, const Vec& psi) {
  const auto& c = spec.constraint();
  if (!c) throw DimensionError("psi given for a problem without endpoint constraint");
  if (static_cast<std::size_t>(psi.size()) != c->g.size()) throw DimensionError("dim(psi) != dim(g)");
}

}  // namespace detail

/// Integrated Euler-Lagrange residual at every node and its sup norm:
/// r(t) = I^(1-alpha)_{b-}[w](t) - I^(1-alpha)_{b-}[w](b) + int_t^b (b-s)^(beta-1)/Gamma(beta) dL/dx ds.
inline std::pair<GridFn, double> el_residual(const ProblemSpec& spec, const TrajectoryPair& traj) {
  const detail::PartialData pd = detail::partial_data(spec, traj);
  const Grid& g = spec.grid();
  const std::size_t N = g.n_cells();
  RowMat r = detail::endpoint_integral_nodes(g, pd.weighted_Lu, spec.alpha());
  const Vec at_b = r.row(static_cast<Eigen::Index>(N)).transpose();
  Vec tail = Vec::Zero(static_cast<Eigen::Index>(spec.dim()));
  r.row(static_cast<Eigen::Index>(N)).setZero();
  for (std::size_t k = N; k-- > 0;) {
    tail += pd.moment_Lx.row(static_cast<Eigen::Index>(k)).transpose();
    r.row(static_cast<Eigen::Index>(k)) += (tail - at_b).transpose();
  }
  GridFn profile(g, std::move(r));
  const double sup = profile.sup_norm();
  return {std::move(profile), sup};
}

/// Endpoint residuals; the g-terms are dropped when psi is absent.
inline std::pair<double, double> transversality_residuals(const ProblemSpec& spec, const TrajectoryPair& traj,
                                                          const std::optional<Vec>& psi = std::nullopt) {
  const detail::PartialData pd = detail::partial_data(spec, traj);
  if (psi) detail::check_psi(spec, *psi);
  const Grid& g = spec.grid();
  Vec ia, ib;
  if (spec.alpha() == 1.0) {
    const RowMat nodes = detail::endpoint_integral_nodes(g, pd.weighted_Lu, 1.0);
    ia = nodes.row(0).transpose();
    ib = nodes.row(nodes.rows() - 1).transpose();
  } else {
    const GridFn w(g, [&] {
      RowMat m(static_cast<Eigen::Index>(g.n_nodes()), pd.weighted_Lu.cols());
      m.topRows(pd.weighted_Lu.rows()) = pd.weighted_Lu;
      m.bottomRows(1) = pd.weighted_Lu.bottomRows(1);
      return m;
    }());
    ia = endpoint_right_integral(w, 1.0 - spec.alpha(), g.a());
    ib = endpoint_right_integral(w, 1.0 - spec.alpha(), g.b());
  }
  Vec ra = ia - pd.phi_a;
  Vec rb = ib + pd.phi_b;
  if (psi) {
    ra += pd.g_a.transpose() * *psi;
    rb -= pd.g_b.transpose() * *psi;
  }
  return {ra.norm(), rb.norm()};
}

struct MultiplierResult {
  Vec psi;
  bool cone_ok = false;
  double residual_a = 0.0;
  double residual_b = 0.0;
};

/// Least-squares multiplier from the constrained transversality equations,
/// restricted to the span of the normal cone at the projected constraint value.
inline MultiplierResult extract_multiplier(const ProblemSpec& spec, const TrajectoryPair& traj) {
  const auto& c = spec.constraint();
  if (!c) throw DomainError("extract_multiplier: problem has no endpoint constraint");
  const detail::PartialData pd = detail::partial_data(spec, traj);
  const auto n = static_cast<Eigen::Index>(spec.dim());
  const auto j = static_cast<Eigen::Index>(c->g.size());

  Mat dg(j, 2 * n);
  dg << pd.g_a, pd.g_b;
  if (j > 2 * n) throw RegularityError("constraint Jacobian cannot be surjective: more constraints than endpoint coordinates");
  const Eigen::JacobiSVD<Mat> svd(dg);
  if (svd.singularValues().minCoeff() <= 1e-8) throw RegularityError("constraint Jacobian is rank deficient");

  // I^(1-alpha)_{b-}[w] at a and b, via the unconstrained residual pieces.
  const Grid& g = spec.grid();
  Vec ia, ib;
  {
    const RowMat nodes = spec.alpha() == 1.0 ? detail::endpoint_integral_nodes(g, pd.weighted_Lu, 1.0)
                                             : RowMat();
    if (spec.alpha() == 1.0) {
      ia = nodes.row(0).transpose();
      ib = nodes.row(nodes.rows() - 1).transpose();
    } else {
      ia = detail::right_integral_at(g, pd.weighted_Lu, 1.0 - spec.alpha(), g.a());
      ib = Vec::Zero(n);
    }
  }

  const Vec proj = project(c->set, pd.g_value);
  const Mat span = normal_cone_span(c->set, proj);
  MultiplierResult out;
  out.psi = Vec::Zero(j);
  if (span.cols() > 0) {
    Mat sys(2 * n, j);
    sys << pd.g_a.transpose(), -pd.g_b.transpose();
    Vec rhs(2 * n);
    rhs << pd.phi_a - ia, -ib - pd.phi_b;
    const Mat reduced = sys * span;
    const Vec theta = reduced.colPivHouseholderQr().solve(rhs);
    out.psi = span * theta;
  }
  out.cone_ok = in_normal_cone(c->set, proj, -out.psi);
  out.residual_a = (ia - pd.phi_a + pd.g_a.transpose() * out.psi).norm();
  out.residual_b = (ib + pd.phi_b - pd.g_b.transpose() * out.psi).norm();
  return out;
}

struct LegendreResult {
  std::vector<std::optional<double>> profile;
  bool ok = true;
};

/// Minimum eigenvalue of (b-t)^(beta-1)/Gamma(beta) d2L/du2 at the nodes.
/// Node a is skipped, and so is node b when beta < 1.
inline LegendreResult legendre_check(const ProblemSpec& spec, const TrajectoryPair& traj, double tol = 0.0) {
  detail::check_traj(spec, traj, "legendre_check");
  const Grid& g = spec.grid();
  const double beta = spec.beta();
  const GridFn x = reconstruct_trajectory(traj.u, traj.y, spec.alpha());
  LegendreResult out;
  out.profile.resize(g.n_nodes());
  for (std::size_t k = 1; k < g.n_nodes(); ++k) {
    if (k == g.n_cells() && beta < 1.0) continue;
    const double t = g.node(k);
    Env env;
    env.t = t;
    env.x = detail::row_span(x.values(), static_cast<Eigen::Index>(k));
    env.u = detail::row_span(traj.u.values(), static_cast<Eigen::Index>(k));
    const double w = std::pow(g.b() - t, beta - 1.0) * inv_gamma(beta);
    Mat m = w * detail::eval_mat(spec.derivatives().L_uu, env);
    m = 0.5 * (m + m.transpose()).eval();
    const double e = Eigen::SelfAdjointEigenSolver<Mat>(m, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    out.profile[k] = e;
    out.ok = out.ok && e >= -tol;
  }
  return out;
}

/// Adjoint with the cost multiplier normalized to -1:
/// p(t) = (b-t)^(alpha-1)/Gamma(alpha) (-dphi/dxb + dg/dxb^T psi) - I^alpha_{b-}[weighted dL/dx](t),
/// sampled at cell midpoints.
inline GridFn adjoint_p(const ProblemSpec& spec, const TrajectoryPair& traj, const std::optional<Vec>& psi = std::nullopt) {
  const detail::PartialData pd = detail::partial_data(spec, traj);
  if (psi) detail::check_psi(spec, *psi);
  const Grid& g = spec.grid();
  const double alpha = spec.alpha();
  Vec end = -pd.phi_b;
  if (psi) end += pd.g_b.transpose() * *psi;
  RowMat out(static_cast<Eigen::Index>(g.n_nodes()), static_cast<Eigen::Index>(spec.dim()));
  for (std::size_t m = 0; m < g.n_cells(); ++m) {
    const double t = g.midpoint(m);
    const Vec v = std::pow(g.b() - t, alpha - 1.0) * inv_gamma(alpha) * end -
                  detail::right_integral_at(g, pd.weighted_Lx, alpha, t);
    out.row(static_cast<Eigen::Index>(m)) = v.transpose();
  }
  out.row(out.rows() - 1) = out.row(out.rows() - 2);
  return GridFn(g, std::move(out));
}

/// Monomial moments int_a^c (s-a)^k u(s) ds, k = 0..max_k, of the piecewise
/// linear interpolant of the node values. Row k, one column per component.
inline Mat moments(const GridFn& u, int max_k) {
  if (max_k < 0) throw DomainError("moments: max_k must be >= 0");
  const Grid& g = u.grid();
  Mat out = Mat::Zero(max_k + 1, static_cast<Eigen::Index>(u.dim()));
  for (std::size_t m = 0; m < g.n_cells(); ++m) {
    const double p0 = g.node(m) - g.a(), p1 = g.node(m + 1) - g.a();
    const Vec u0 = u.row(m), u1 = u.row(m + 1);
    const Vec slope = (u1 - u0) / (p1 - p0);
    for (int k = 0; k <= max_k; ++k) {
      const double ik = (std::pow(p1, k + 1) - std::pow(p0, k + 1)) / (k + 1);
      const double ik1 = (std::pow(p1, k + 2) - std::pow(p0, k + 2)) / (k + 2);
      out.row(k) += ((u0 - slope * p0) * ik + slope * ik1).transpose();
    }
  }
  return out;
}

/// Sup-norm residual of a least-squares polynomial fit to
/// Psi(t) = int_a^c (t-s)^(alpha-1)/Gamma(alpha) u(s) ds on [lo, hi], lo >= c.
/// u is read as piecewise constant on the cells of its grid.
inline double rigidity_probe(double alpha, const GridFn& u_left, double lo, double hi, int fit_degree = 0,
                             std::size_t samples = 257) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("rigidity_probe: alpha must lie in (0, 1)");
  if (fit_degree < 0) throw DomainError("rigidity_probe: fit_degree must be >= 0");
  const Grid& g = u_left.grid();
  if (!(hi > lo) || lo < g.b() || samples < static_cast<std::size_t>(fit_degree) + 2) {
    throw DomainError("rigidity_probe: degenerate window");
  }
  const auto S = static_cast<Eigen::Index>(samples);
  const double ig = inv_gamma(alpha + 1.0);
  Mat psi = Mat::Zero(S, static_cast<Eigen::Index>(u_left.dim()));
  Mat vander(S, fit_degree + 1);
  const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  for (Eigen::Index i = 0; i < S; ++i) {
    const double t = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(S - 1);
    for (std::size_t m = 0; m < g.n_cells(); ++m) {
      const double wgt = (std::pow(t - g.node(m), alpha) - std::pow(t - g.node(m + 1), alpha)) * ig;
      psi.row(i) += wgt * u_left.cell(m).transpose();
    }
    const double s = (t - mid) / half;
    double p = 1.0;
    for (int d = 0; d <= fit_degree; ++d, p *= s) vander(i, d) = p;
  }
  const Mat coef = vander.colPivHouseholderQr().solve(psi);
  return (psi - vander * coef).cwiseAbs().maxCoeff();
}

/// Full residual report. The multiplier is extracted for every constraint
/// other than the free one.
inline ResidualReport residual_report(const ProblemSpec& spec, const TrajectoryPair& traj, double legendre_tol = 1e-9) {
  auto [profile, sup] = el_residual(spec, traj);
  std::optional<Vec> psi;
  std::optional<bool> in_cone;
  const auto& c = spec.constraint();
  if (c && c->kind != ConstraintKind::Free) {
    const MultiplierResult mr = extract_multiplier(spec, traj);
    psi = mr.psi;
    in_cone = mr.cone_ok;
  }
  const auto [ta, tb] = transversality_residuals(spec, traj, psi);
  LegendreResult lr = legendre_check(spec, traj, legendre_tol);
  return ResidualReport{.el_residual_sup = sup,
                        .el_residual_profile = std::move(profile),
                        .transversality_a = ta,
                        .transversality_b = tb,
                        .legendre_min_eig_profile = std::move(lr.profile),
                        .legendre_ok = lr.ok,
                        .psi = psi,
                        .psi_in_cone = in_cone,
                        .adjoint_p = adjoint_p(spec, traj, psi)};
}

}  // namespace fracvar
