#pragma once

// Riemann-Liouville integrals and Caputo derivatives on uniform grids.
//
// Data are read as piecewise constant on cells (left value) and the kernel
// (t - s)^(alpha - 1) / Gamma(alpha) is integrated exactly over each cell, so
// every operator is a discrete convolution with one weight table per order.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "fracvar/errors.hpp"
#include "fracvar/gamma.hpp"
#include "fracvar/grid.hpp"

namespace fracvar {

/// Exact kernel moments over whole cells:
/// weights[m] = ((m+1)^alpha - m^alpha) h^alpha / Gamma(alpha+1).
struct FracWeights {
  double alpha = 0.0;
  double h = 0.0;
  std::vector<double> weights;

  FracWeights(double alpha_, double h_, std::size_t count) : alpha(alpha_), h(h_), weights(count) {
    if (!(alpha_ > 0.0)) throw DomainError("FracWeights: order must be positive");
    if (!(h_ > 0.0)) throw DomainError("FracWeights: step must be positive");
    const double scale = std::pow(h_, alpha_) * inv_gamma(alpha_ + 1.0);
    for (std::size_t m = 0; m < count; ++m) {
      const double md = static_cast<double>(m);
      weights[m] = (std::pow(md + 1.0, alpha_) - std::pow(md, alpha_)) * scale;
    }
  }

  double operator[](std::size_t m) const { return weights[m]; }
  std::size_t size() const noexcept { return weights.size(); }
};

namespace detail {

inline void check_order(double alpha, const char* who) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw DomainError(std::string(who) + ": order must be finite and >= 0");
  }
}

inline void check_caputo_order(double alpha, const char* who) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError(std::string(who) + ": order must lie in (0, 1]");
}

/// Kernel weights for the value at a cell midpoint:
/// mid[0] covers the half cell [t_m, t_m + h/2], mid[d] the whole cell m - d.
inline std::vector<double> midpoint_weights(double alpha, double h, std::size_t count) {
  std::vector<double> mid(count);
  const double scale = std::pow(h, alpha) * inv_gamma(alpha + 1.0);
  for (std::size_t d = 0; d < count; ++d) {
    const double dd = static_cast<double>(d);
    mid[d] = d == 0 ? std::pow(0.5, alpha) * scale
                    : (std::pow(dd + 0.5, alpha) - std::pow(dd - 0.5, alpha)) * scale;
  }
  return mid;
}

/// Integral over [lo, hi] (lo >= t) of (s - t)^(order-1) / Gamma(order).
inline double right_kernel_moment(double order, double t, double lo, double hi) {
  return (std::pow(hi - t, order) - std::pow(lo - t, order)) * inv_gamma(order + 1.0);
}

/// Right integral of order in (0, 1] of the piecewise-constant reading of
/// `cells` (row m on cell m), evaluated at an arbitrary t in [a, b].
inline Vec right_integral_at(const Grid& grid, const RowMat& cells, double order, double t) {
  Vec out = Vec::Zero(cells.cols());
  if (t >= grid.b()) return out;
  const double h = grid.step();
  const std::size_t n = grid.n_cells();
  std::size_t first = static_cast<std::size_t>(std::clamp(std::floor((t - grid.a()) / h), 0.0,
                                                          static_cast<double>(n - 1)));
  for (std::size_t m = first; m < n; ++m) {
    const double lo = std::max(grid.node(m), t);
    const double hi = grid.node(m + 1);
    if (hi <= t) continue;
    out += right_kernel_moment(order, t, lo, hi) * cells.row(m).transpose();
  }
  return out;
}

}  // namespace detail

/// Left Riemann-Liouville integral I^alpha_{a+}[u] at every node.
/// Value at a is zero for alpha > 0; alpha = 0 returns u.
inline GridFn rl_integral_left(const GridFn& u, double alpha) {
  detail::check_order(alpha, "rl_integral_left");
  if (alpha == 0.0) return u;
  const Grid& g = u.grid();
  const std::size_t n = g.n_cells();
  const FracWeights w(alpha, g.step(), n);
  const RowMat& in = u.values();
  RowMat out = RowMat::Zero(n + 1, u.dim());
  for (std::size_t k = 1; k <= n; ++k) {
    for (std::size_t m = 0; m < k; ++m) out.row(k) += w[k - 1 - m] * in.row(m);
  }
  return GridFn(g, std::move(out));
}

/// Right Riemann-Liouville integral I^alpha_{b-}[u] at every node.
/// Value at b is zero for alpha > 0; alpha = 0 returns u.
inline GridFn rl_integral_right(const GridFn& u, double alpha) {
  detail::check_order(alpha, "rl_integral_right");
  if (alpha == 0.0) return u;
  const Grid& g = u.grid();
  const std::size_t n = g.n_cells();
  const FracWeights w(alpha, g.step(), n);
  const RowMat& in = u.values();
  RowMat out = RowMat::Zero(n + 1, u.dim());
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t m = k; m < n; ++m) out.row(k) += w[m - k] * in.row(m);
  }
  return GridFn(g, std::move(out));
}

/// Left Caputo derivative by the L1 scheme: forward differences on cells,
/// then I^(1-alpha). For alpha = 1 the difference quotients are returned.
inline GridFn caputo_derivative_left(const GridFn& x, double alpha) {
  detail::check_caputo_order(alpha, "caputo_derivative_left");
  const Grid& g = x.grid();
  const std::size_t n = g.n_cells();
  RowMat d(n + 1, x.dim());
  const RowMat& v = x.values();
  for (std::size_t m = 0; m < n; ++m) d.row(m) = (v.row(m + 1) - v.row(m)) / g.step();
  d.row(n) = d.row(n - 1);
  GridFn diff(g, std::move(d));
  if (alpha == 1.0) return diff;
  return rl_integral_left(diff, 1.0 - alpha);
}

/// x = y + I^alpha_{a+}[u] at every node; x(a) = y exactly.
inline GridFn reconstruct_trajectory(const GridFn& u, const Vec& y, double alpha) {
  detail::check_caputo_order(alpha, "reconstruct_trajectory");
  if (static_cast<std::size_t>(y.size()) != u.dim()) throw DimensionError("reconstruct_trajectory: dim(y) != dim(u)");
  GridFn x = rl_integral_left(u, alpha);
  x.values().rowwise() += y.transpose();
  return x;
}

/// x = y + I^alpha_{a+}[u] at the midpoint of every cell (n_cells rows).
inline RowMat midpoint_trajectory(const GridFn& u, const Vec& y, double alpha) {
  detail::check_caputo_order(alpha, "midpoint_trajectory");
  if (static_cast<std::size_t>(y.size()) != u.dim()) throw DimensionError("midpoint_trajectory: dim(y) != dim(u)");
  const Grid& g = u.grid();
  const std::size_t n = g.n_cells();
  const std::vector<double> mid = detail::midpoint_weights(alpha, g.step(), n);
  const RowMat& in = u.values();
  RowMat out(n, u.dim());
  for (std::size_t m = 0; m < n; ++m) {
    out.row(m) = y.transpose();
    for (std::size_t j = 0; j <= m; ++j) out.row(m) += mid[m - j] * in.row(j);
  }
  return out;
}

/// Closed form of I^alpha_{a+}[nu] for nu = v on [tau, tau+h) and 0 elsewhere,
/// evaluated exactly at the nodes.
inline GridFn window_variation(const Grid& grid, double alpha, double tau, double h, const Vec& v) {
  detail::check_caputo_order(alpha, "window_variation");
  const double slack = 1e-12 * (grid.b() - grid.a());
  if (!(h > 0.0) || tau < grid.a() - slack || tau + h > grid.b() + slack) {
    throw DomainError("window_variation: window [tau, tau+h] must lie inside [a, b] with h > 0");
  }
  const double ig = inv_gamma(1.0 + alpha);
  RowMat out = RowMat::Zero(grid.n_nodes(), v.size());
  for (std::size_t k = 0; k < grid.n_nodes(); ++k) {
    const double t = grid.node(k);
    double c = 0.0;
    if (t <= tau) {
      c = 0.0;
    } else if (t <= tau + h) {
      c = std::pow(t - tau, alpha) * ig;
    } else {
      c = (std::pow(t - tau, alpha) - std::pow(t - (tau + h), alpha)) * ig;
    }
    out.row(k) = c * v.transpose();
  }
  return GridFn(grid, std::move(out));
}

/// I^order_{b-}[w](t) for order in (0, 1); exactly zero at t = b.
inline Vec endpoint_right_integral(const GridFn& w, double order, double t) {
  if (!(order > 0.0 && order < 1.0)) throw DomainError("endpoint_right_integral: order must lie in (0, 1)");
  const Grid& g = w.grid();
  if (!(t >= g.a() && t <= g.b())) throw DomainError("endpoint_right_integral: t outside [a, b]");
  if (t == g.b()) return Vec::Zero(w.dim());
  return detail::right_integral_at(g, w.values(), order, t);
}

}  // namespace fracvar
