#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "fracvar/errors.hpp"
#include "fracvar/expr.hpp"
#include "fracvar/grid.hpp"

namespace fracvar {

// ---------------------------------------------------------------------------
// Convex target sets

class ConvexSet;

namespace sets {
struct WholeSpace {
  std::size_t dim = 0;
};
struct Singleton {
  Vec point;
};
/// Componentwise bounds; +-infinity allowed.
struct Box {
  Vec lower;
  Vec upper;
};
struct Ball {
  Vec center;
  double radius = 0.0;
};
struct Product {
  std::vector<ConvexSet> parts;
};
}  // namespace sets

/// Closed convex subset of R^j, built from a few shapes and their products.
class ConvexSet {
 public:
  using Shape = std::variant<sets::WholeSpace, sets::Singleton, sets::Box, sets::Ball, sets::Product>;

  static ConvexSet whole_space(std::size_t j) { return ConvexSet(sets::WholeSpace{j}); }
  static ConvexSet singleton(Vec p) { return ConvexSet(sets::Singleton{std::move(p)}); }
  static ConvexSet box(Vec lower, Vec upper) { return ConvexSet(sets::Box{std::move(lower), std::move(upper)}); }
  static ConvexSet ball(Vec center, double radius) { return ConvexSet(sets::Ball{std::move(center), radius}); }
  static ConvexSet product(std::vector<ConvexSet> parts) { return ConvexSet(sets::Product{std::move(parts)}); }

  const Shape& shape() const noexcept { return shape_; }

  std::size_t dim() const {
    return std::visit(
        [](const auto& s) -> std::size_t {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, sets::WholeSpace>) {
            return s.dim;
          } else if constexpr (std::is_same_v<T, sets::Singleton>) {
            return static_cast<std::size_t>(s.point.size());
          } else if constexpr (std::is_same_v<T, sets::Box>) {
            return static_cast<std::size_t>(s.lower.size());
          } else if constexpr (std::is_same_v<T, sets::Ball>) {
            return static_cast<std::size_t>(s.center.size());
          } else {
            std::size_t d = 0;
            for (const auto& p : s.parts) d += p.dim();
            return d;
          }
        },
        shape_);
  }

  /// Human-readable problems with this set (empty when well formed).
  std::vector<std::string> problems() const {
    std::vector<std::string> out;
    std::visit(
        [&](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, sets::WholeSpace>) {
            if (s.dim == 0) out.push_back("whole space of dimension 0");
          } else if constexpr (std::is_same_v<T, sets::Singleton>) {
            if (s.point.size() == 0) out.push_back("singleton of dimension 0");
            if (!s.point.allFinite()) out.push_back("singleton point not finite");
          } else if constexpr (std::is_same_v<T, sets::Box>) {
            if (s.lower.size() != s.upper.size()) out.push_back("box bounds have different sizes");
            if (s.lower.size() == 0) out.push_back("box of dimension 0");
            for (Eigen::Index i = 0; i < std::min(s.lower.size(), s.upper.size()); ++i) {
              if (std::isnan(s.lower[i]) || std::isnan(s.upper[i])) {
                out.push_back("box bound " + std::to_string(i) + " is NaN");
              } else if (s.lower[i] > s.upper[i]) {
                out.push_back("box lower > upper in component " + std::to_string(i));
              } else if (s.lower[i] == std::numeric_limits<double>::infinity() ||
                         s.upper[i] == -std::numeric_limits<double>::infinity()) {
                out.push_back("box component " + std::to_string(i) + " is empty");
              }
            }
          } else if constexpr (std::is_same_v<T, sets::Ball>) {
            if (s.center.size() == 0) out.push_back("ball of dimension 0");
            if (!s.center.allFinite()) out.push_back("ball center not finite");
            if (!(s.radius >= 0.0) || !std::isfinite(s.radius)) out.push_back("ball radius must be finite and >= 0");
          } else {
            if (s.parts.empty()) out.push_back("empty product");
            for (std::size_t i = 0; i < s.parts.size(); ++i) {
              for (auto& p : s.parts[i].problems()) out.push_back("part " + std::to_string(i) + ": " + p);
            }
          }
        },
        shape_);
    return out;
  }

 private:
  explicit ConvexSet(Shape s) : shape_(std::move(s)) {}
  Shape shape_;
};

// ---------------------------------------------------------------------------
// Problem definition

enum class ConstraintKind { Free, FixedInitial, FixedBoth, Periodic, Custom };

inline const char* constraint_kind_name(ConstraintKind k) {
  switch (k) {
    case ConstraintKind::Free: return "free";
    case ConstraintKind::FixedInitial: return "fixed_initial";
    case ConstraintKind::FixedBoth: return "fixed_both";
    case ConstraintKind::Periodic: return "periodic";
    case ConstraintKind::Custom: return "custom";
  }
  return "custom";
}

/// Mixed initial/final constraint g(x(a), x(b)) in S.
struct Constraint {
  std::vector<Expr> g;  // j expressions in xa, xb
  ConvexSet set = ConvexSet::whole_space(1);
  ConstraintKind kind = ConstraintKind::Custom;
  std::optional<Vec> fixed_initial;  // x_a when the initial point is pinned

  std::size_t j() const noexcept { return g.size(); }
};

/// The (g, S) pairs for the usual endpoint situations.
inline Constraint standard_constraint(ConstraintKind kind, std::size_t n, const Vec& x_a = Vec(),
                                      const Vec& x_b = Vec()) {
  Constraint c;
  c.kind = kind;
  auto identity = [&] {
    std::vector<Expr> g;
    for (std::size_t i = 0; i < n; ++i) g.push_back(Expr::variable(Variable::xa(i)));
    for (std::size_t i = 0; i < n; ++i) g.push_back(Expr::variable(Variable::xb(i)));
    return g;
  };
  auto need = [&](const Vec& v, const char* name) {
    if (static_cast<std::size_t>(v.size()) != n) {
      throw DimensionError(std::string("standard_constraint: ") + name + " must have dimension " + std::to_string(n));
    }
  };
  switch (kind) {
    case ConstraintKind::Free:
      c.g = identity();
      c.set = ConvexSet::whole_space(2 * n);
      break;
    case ConstraintKind::FixedInitial:
      need(x_a, "x_a");
      c.g = identity();
      c.set = ConvexSet::product({ConvexSet::singleton(x_a), ConvexSet::whole_space(n)});
      c.fixed_initial = x_a;
      break;
    case ConstraintKind::FixedBoth: {
      need(x_a, "x_a");
      need(x_b, "x_b");
      c.g = identity();
      Vec p(2 * n);
      p << x_a, x_b;
      c.set = ConvexSet::singleton(p);
      c.fixed_initial = x_a;
      break;
    }
    case ConstraintKind::Periodic:
      for (std::size_t i = 0; i < n; ++i) {
        c.g.push_back(Expr::variable(Variable::xb(i)) - Expr::variable(Variable::xa(i)));
      }
      c.set = ConvexSet::singleton(Vec::Zero(static_cast<Eigen::Index>(n)));
      break;
    case ConstraintKind::Custom:
      throw DomainError("standard_constraint: custom constraints need explicit g and S");
  }
  return c;
}

/// Symbolic partial derivatives needed by the differentials and conditions.
struct SymbolicDerivatives {
  using ExprMat = std::vector<std::vector<Expr>>;

  std::vector<Expr> phi_xa, phi_xb;  // d phi / d xa_i, d phi / d xb_i
  ExprMat phi_aa, phi_ab, phi_bb;    // endpoint Hessian blocks A, B, C
  std::vector<Expr> L_x, L_u;        // d L / d x_i, d L / d u_i
  ExprMat L_xx, L_xu, L_uu;          // Lagrangian Hessian blocks P, Q, R
  ExprMat g_xa, g_xb;                // j x n Jacobian blocks of g

  static SymbolicDerivatives build(const Expr& phi, const Expr& lagrangian, const std::vector<Expr>* g,
                                   std::size_t n) {
    SymbolicDerivatives d;
    auto grad = [n](const Expr& e, auto make) {
      std::vector<Expr> out;
      for (std::size_t i = 0; i < n; ++i) out.push_back(e.differentiate(make(i)));
      return out;
    };
    auto hess = [n](const std::vector<Expr>& first, auto make) {
      ExprMat out(n);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < n; ++k) out[i].push_back(first[i].differentiate(make(k)));
      }
      return out;
    };
    d.phi_xa = grad(phi, Variable::xa);
    d.phi_xb = grad(phi, Variable::xb);
    d.phi_aa = hess(d.phi_xa, Variable::xa);
    d.phi_ab = hess(d.phi_xa, Variable::xb);
    d.phi_bb = hess(d.phi_xb, Variable::xb);
    d.L_x = grad(lagrangian, Variable::x);
    d.L_u = grad(lagrangian, Variable::u);
    d.L_xx = hess(d.L_x, Variable::x);
    d.L_xu = hess(d.L_x, Variable::u);
    d.L_uu = hess(d.L_u, Variable::u);
    if (g) {
      for (const Expr& gi : *g) {
        d.g_xa.push_back(grad(gi, Variable::xa));
        d.g_xb.push_back(grad(gi, Variable::xb));
      }
    }
    return d;
  }
};

/// Problem (P): minimise phi(x(a), x(b)) + I^beta_{a+}[L(x, cD^alpha x, t)](b)
/// subject to the optional endpoint constraint.
class ProblemSpec {
 public:
  ProblemSpec(double alpha, double beta, const Grid& grid, std::size_t dim, Expr phi, Expr lagrangian,
              std::optional<Constraint> constraint = std::nullopt)
      : alpha_(alpha),
        beta_(beta),
        grid_(grid),
        dim_(dim),
        phi_(std::move(phi)),
        lagrangian_(std::move(lagrangian)),
        constraint_(std::move(constraint)) {
    derivs_ = std::make_shared<const SymbolicDerivatives>(
        SymbolicDerivatives::build(phi_, lagrangian_, constraint_ ? &constraint_->g : nullptr, dim_));
  }

  /// Parses the Mayer and Lagrange expressions against `dim`.
  static ProblemSpec from_strings(double alpha, double beta, const Grid& grid, std::size_t dim,
                                  std::string_view phi, std::string_view lagrangian,
                                  std::optional<Constraint> constraint = std::nullopt) {
    return ProblemSpec(alpha, beta, grid, dim, parse_expr(phi, dim), parse_expr(lagrangian, dim),
                       std::move(constraint));
  }

  double alpha() const noexcept { return alpha_; }
  double beta() const noexcept { return beta_; }
  const Grid& grid() const noexcept { return grid_; }
  std::size_t dim() const noexcept { return dim_; }
  const Expr& phi() const noexcept { return phi_; }
  const Expr& lagrangian() const noexcept { return lagrangian_; }
  const std::optional<Constraint>& constraint() const noexcept { return constraint_; }
  const SymbolicDerivatives& derivatives() const noexcept { return *derivs_; }

  ProblemSpec with_alpha(double alpha) const {
    ProblemSpec p = *this;
    p.alpha_ = alpha;
    return p;
  }
  ProblemSpec with_grid(const Grid& grid) const {
    ProblemSpec p = *this;
    p.grid_ = grid;
    return p;
  }

 private:
  double alpha_;
  double beta_;
  Grid grid_;
  std::size_t dim_;
  Expr phi_;
  Expr lagrangian_;
  std::optional<Constraint> constraint_;
  std::shared_ptr<const SymbolicDerivatives> derivs_;
};

struct Violation {
  std::string path;
  std::string message;
};

/// Checks every invariant of the problem and reports all violations.
inline std::vector<Violation> validate(const ProblemSpec& spec) {
  std::vector<Violation> out;
  if (!(spec.alpha() > 0.0 && spec.alpha() <= 1.0)) out.push_back({"alpha", "alpha out of (0,1]"});
  if (!(spec.beta() > 0.0) || !std::isfinite(spec.beta())) out.push_back({"beta", "beta must be > 0"});
  if (spec.dim() == 0) out.push_back({"dim", "dim must be positive"});

  auto check_vars = [&](const Expr& e, const std::string& path, std::initializer_list<VarKind> allowed) {
    for (const Variable& v : e.variables()) {
      bool ok = false;
      for (VarKind k : allowed) ok = ok || v.kind == k;
      if (!ok) {
        out.push_back({path, "variable " + v.name() + " not allowed here"});
      } else if (v.kind != VarKind::T && v.index >= spec.dim()) {
        out.push_back({path, "variable " + v.name() + " exceeds dimension"});
      }
    }
  };
  check_vars(spec.phi(), "phi", {VarKind::XA, VarKind::XB});
  check_vars(spec.lagrangian(), "lagrangian", {VarKind::X, VarKind::U, VarKind::T});

  if (const auto& c = spec.constraint()) {
    if (c->g.empty()) out.push_back({"constraint.g", "constraint map is empty"});
    for (std::size_t i = 0; i < c->g.size(); ++i) {
      check_vars(c->g[i], "constraint.g[" + std::to_string(i) + "]", {VarKind::XA, VarKind::XB});
    }
    if (c->set.dim() != c->g.size()) {
      out.push_back({"constraint.set", "set dimension " + std::to_string(c->set.dim()) +
                                           " != number of constraint expressions " + std::to_string(c->g.size())});
    }
    for (auto& p : c->set.problems()) out.push_back({"constraint.set", p});
    if (c->fixed_initial && static_cast<std::size_t>(c->fixed_initial->size()) != spec.dim()) {
      out.push_back({"constraint.x_a", "fixed initial point has wrong dimension"});
    }
  }
  return out;
}

/// A trajectory x = y + I^alpha[u], stored only through (u, y).
struct TrajectoryPair {
  GridFn u;
  Vec y;
  std::optional<double> radius;  // active bound on sup |u(t)|

  TrajectoryPair(GridFn u_, Vec y_, std::optional<double> radius_ = std::nullopt)
      : u(std::move(u_)), y(std::move(y_)), radius(radius_) {
    if (static_cast<std::size_t>(y.size()) != u.dim()) throw DimensionError("TrajectoryPair: dim(y) != dim(u)");
    if (!y.allFinite()) throw DomainError("TrajectoryPair: y not finite");
  }

  static TrajectoryPair zero(const Grid& grid, std::size_t n) {
    return TrajectoryPair(GridFn(grid, n), Vec::Zero(static_cast<Eigen::Index>(n)));
  }

  std::size_t dim() const noexcept { return u.dim(); }
  const Grid& grid() const noexcept { return u.grid(); }
};

}  // namespace fracvar
