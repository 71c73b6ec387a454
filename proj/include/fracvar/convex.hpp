#pragma once

// Projection, squared distance and normal cones for ConvexSet.

#include <algorithm>
#include <cmath>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "fracvar/errors.hpp"
#include "fracvar/model.hpp"

namespace fracvar {

inline constexpr double kConeTol = 1e-9;

namespace detail {
inline void check_dim(const ConvexSet& s, const Vec& z, const char* who) {
  if (static_cast<std::size_t>(z.size()) != s.dim()) {
    throw DimensionError(std::string(who) + ": vector of size " + std::to_string(z.size()) +
                         " for a set of dimension " + std::to_string(s.dim()));
  }
}
}  // namespace detail

/// Unique nearest point of S.
inline Vec project(const ConvexSet& s, const Vec& z) {
  detail::check_dim(s, z, "project");
  return std::visit(
      [&](const auto& sh) -> Vec {
        using T = std::decay_t<decltype(sh)>;
        if constexpr (std::is_same_v<T, sets::WholeSpace>) {
          return z;
        } else if constexpr (std::is_same_v<T, sets::Singleton>) {
          return sh.point;
        } else if constexpr (std::is_same_v<T, sets::Box>) {
          return z.cwiseMax(sh.lower).cwiseMin(sh.upper);
        } else if constexpr (std::is_same_v<T, sets::Ball>) {
          const Vec d = z - sh.center;
          const double r = d.norm();
          if (r <= sh.radius) return z;
          return sh.center + (sh.radius / r) * d;
        } else {
          Vec out(z.size());
          Eigen::Index off = 0;
          for (const ConvexSet& p : sh.parts) {
            const auto k = static_cast<Eigen::Index>(p.dim());
            out.segment(off, k) = project(p, z.segment(off, k));
            off += k;
          }
          return out;
        }
      },
      s.shape());
}

inline double dist(const ConvexSet& s, const Vec& z) { return (z - project(s, z)).norm(); }
inline double dist_sq(const ConvexSet& s, const Vec& z) { return (z - project(s, z)).squaredNorm(); }

/// Gradient of the squared distance: 2 (z - P_S(z)).
inline Vec dist_sq_gradient(const ConvexSet& s, const Vec& z) { return 2.0 * (z - project(s, z)); }

/// Whether d lies in the normal cone N_S[z] up to `tol`. Requires dist(S, z) <= tol.
inline bool in_normal_cone(const ConvexSet& s, const Vec& z, const Vec& d, double tol = kConeTol) {
  detail::check_dim(s, z, "in_normal_cone");
  detail::check_dim(s, d, "in_normal_cone");
  if (dist(s, z) > tol) throw DomainError("in_normal_cone: point is not in the set");
  return std::visit(
      [&](const auto& sh) -> bool {
        using T = std::decay_t<decltype(sh)>;
        if constexpr (std::is_same_v<T, sets::WholeSpace>) {
          return d.norm() <= tol;
        } else if constexpr (std::is_same_v<T, sets::Singleton>) {
          return true;
        } else if constexpr (std::is_same_v<T, sets::Box>) {
          for (Eigen::Index i = 0; i < z.size(); ++i) {
            const bool at_upper = std::isfinite(sh.upper[i]) && z[i] >= sh.upper[i] - tol;
            const bool at_lower = std::isfinite(sh.lower[i]) && z[i] <= sh.lower[i] + tol;
            if (at_upper && at_lower) continue;
            if (at_upper && d[i] < -tol) return false;
            if (at_lower && d[i] > tol) return false;
            if (!at_upper && !at_lower && std::abs(d[i]) > tol) return false;
          }
          return true;
        } else if constexpr (std::is_same_v<T, sets::Ball>) {
          if (sh.radius == 0.0) return true;
          const Vec off = z - sh.center;
          if (off.norm() < sh.radius - tol) return d.norm() <= tol;
          const Vec n = off.normalized();
          const double along = n.dot(d);
          return along >= -tol && (d - along * n).norm() <= tol;
        } else {
          Eigen::Index o = 0;
          for (const ConvexSet& p : sh.parts) {
            const auto k = static_cast<Eigen::Index>(p.dim());
            if (!in_normal_cone(p, z.segment(o, k), d.segment(o, k), tol)) return false;
            o += k;
          }
          return true;
        }
      },
      s.shape());
}

/// Orthonormal basis (columns) of the linear span of N_S[z] for z in S.
inline Mat normal_cone_span(const ConvexSet& s, const Vec& z, double tol = kConeTol) {
  detail::check_dim(s, z, "normal_cone_span");
  const auto j = static_cast<Eigen::Index>(s.dim());
  return std::visit(
      [&](const auto& sh) -> Mat {
        using T = std::decay_t<decltype(sh)>;
        if constexpr (std::is_same_v<T, sets::WholeSpace>) {
          return Mat(j, 0);
        } else if constexpr (std::is_same_v<T, sets::Singleton>) {
          return Mat::Identity(j, j);
        } else if constexpr (std::is_same_v<T, sets::Box>) {
          std::vector<Eigen::Index> active;
          for (Eigen::Index i = 0; i < j; ++i) {
            const bool at_upper = std::isfinite(sh.upper[i]) && z[i] >= sh.upper[i] - tol;
            const bool at_lower = std::isfinite(sh.lower[i]) && z[i] <= sh.lower[i] + tol;
            if (at_upper || at_lower) active.push_back(i);
          }
          Mat out = Mat::Zero(j, static_cast<Eigen::Index>(active.size()));
          for (std::size_t c = 0; c < active.size(); ++c) out(active[c], static_cast<Eigen::Index>(c)) = 1.0;
          return out;
        } else if constexpr (std::is_same_v<T, sets::Ball>) {
          if (sh.radius == 0.0) return Mat::Identity(j, j);
          const Vec off = z - sh.center;
          if (off.norm() < sh.radius - tol) return Mat(j, 0);
          return off.normalized();
        } else {
          std::vector<Mat> blocks;
          Eigen::Index cols = 0, o = 0;
          for (const ConvexSet& p : sh.parts) {
            const auto k = static_cast<Eigen::Index>(p.dim());
            blocks.push_back(normal_cone_span(p, z.segment(o, k), tol));
            cols += blocks.back().cols();
            o += k;
          }
          Mat out = Mat::Zero(j, cols);
          Eigen::Index r = 0, c = 0;
          for (const Mat& b : blocks) {
            out.block(r, c, b.rows(), b.cols()) = b;
            r += b.rows();
            c += b.cols();
          }
          return out;
        }
      },
      s.shape());
}

}  // namespace fracvar
