#pragma once

// Direct minimization of the discrete Bolza functional.
//
// The unknowns are the cell values of u and the initial value y. Endpoint
// constraints are handled by the smooth penalty rho * d_S^2(g(x(a), x(b)))
// with rho increased stage by stage (warm started). Each stage runs a
// projected limited-memory BFGS iteration with Armijo backtracking; the
// projection keeps every cell value of u in the ball of radius R.

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fracvar/conditions.hpp"
#include "fracvar/convex.hpp"
#include "fracvar/errors.hpp"
#include "fracvar/frac_ops.hpp"
#include "fracvar/functional.hpp"
#include "fracvar/model.hpp"

namespace fracvar {

struct SolverConfig {
  double radius = 1e3;                                     // bound on |u(t)|
  std::vector<double> epsilon_schedule{1e-4, 1e-6, 1e-8, 1e-10};
  std::vector<double> penalty_weights{1e4, 1e5, 1e6, 1e7};  // rho_k, one per epsilon
  int max_iters = 5000;                                    // per stage
  double grad_tol = 1e-6;
  double grad_scale = 1.0;  // stage k stops at max(grad_tol, sqrt(eps_k) * grad_scale)
  double shrink = 0.5;
  double sufficient_decrease = 1e-4;
  int memory = 10;

  /// Human-readable problems; empty when the configuration is usable.
  std::vector<std::string> problems() const {
    std::vector<std::string> out;
    if (!(radius > 0.0)) out.emplace_back("radius must be positive");
    if (epsilon_schedule.empty()) out.emplace_back("epsilon_schedule must not be empty");
    for (std::size_t k = 0; k < epsilon_schedule.size(); ++k) {
      if (!(epsilon_schedule[k] > 0.0)) out.emplace_back("epsilon_schedule entries must be positive");
      if (k > 0 && !(epsilon_schedule[k] < epsilon_schedule[k - 1])) {
        out.emplace_back("epsilon_schedule must be strictly decreasing");
      }
    }
    if (penalty_weights.size() != epsilon_schedule.size()) {
      out.emplace_back("penalty_weights and epsilon_schedule must have the same length");
    }
    for (double w : penalty_weights) {
      if (!(w > 0.0)) out.emplace_back("penalty weights must be positive");
    }
    if (max_iters < 1) out.emplace_back("max_iters must be >= 1");
    if (!(grad_tol > 0.0) || !(grad_scale > 0.0)) out.emplace_back("tolerances must be positive");
    if (!(shrink > 0.0 && shrink < 1.0)) out.emplace_back("shrink must lie in (0, 1)");
    if (!(sufficient_decrease > 0.0 && sufficient_decrease < 1.0)) {
      out.emplace_back("sufficient_decrease must lie in (0, 1)");
    }
    if (memory < 0) out.emplace_back("memory must be >= 0");
    return out;
  }
};

enum class SolveStatus { Converged, MaxIters, Stalled, Diverged };

inline const char* solve_status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIters: return "max_iters";
    case SolveStatus::Stalled: return "stalled";
    case SolveStatus::Diverged: return "diverged";
  }
  return "unknown";
}

struct StageInfo {
  double penalty_weight = 0.0;
  double epsilon = 0.0;
  int iterations = 0;
  double grad_norm = 0.0;
  double feasibility_distance = 0.0;
  SolveStatus status = SolveStatus::MaxIters;
};

struct SolveResult {
  TrajectoryPair traj;
  double objective = 0.0;
  double feasibility_distance = 0.0;
  ResidualReport report;
  int iterations = 0;
  bool converged = false;
  double grad_norm = 0.0;  // of the unpenalized objective, L2 metric
  SolveStatus status = SolveStatus::MaxIters;
  std::vector<StageInfo> stages;
};

namespace detail {

struct ValueGrad {
  double value = 0.0;      // Phi
  double penalty = 0.0;    // rho d_S^2
  RowMat grad_u;           // n_cells x dim
  Vec grad_y;
};

/// Phi, the penalty and the gradient of Phi + rho d_S^2 in the discrete
/// inner product sum_m <a_m, b_m> + <a_y, b_y>.
inline ValueGrad value_and_gradient(const ProblemSpec& spec, const TrajectoryPair& traj, double rho) {
  check_traj(spec, traj, "objective_gradient");
  const auto& d = spec.derivatives();
  const Grid& g = spec.grid();
  const std::size_t N = g.n_cells();
  const auto n = static_cast<Eigen::Index>(spec.dim());
  const Sampled s(spec, traj);

  ValueGrad out;
  RowMat lx(static_cast<Eigen::Index>(N), n);
  out.grad_u.resize(static_cast<Eigen::Index>(N), n);
  double lagrange = 0.0;
  for (std::size_t m = 0; m < N; ++m) {
    const Env env = s.cell_env(traj, m);
    const auto r = static_cast<Eigen::Index>(m);
    lagrange += s.cost[m] * spec.lagrangian().evaluate(env);
    lx.row(r) = s.cost[m] * eval_vec(d.L_x, env).transpose();
    out.grad_u.row(r) = s.cost[m] * eval_vec(d.L_u, env).transpose();
  }
  const Env ends = s.ends();
  out.value = spec.phi().evaluate(ends) + lagrange;
  Vec phi_a = eval_vec(d.phi_xa, ends);
  Vec phi_b = eval_vec(d.phi_xb, ends);
  if (rho > 0.0 && spec.constraint()) {
    const Constraint& c = *spec.constraint();
    const Vec gv = eval_vec(c.g, ends);
    const Vec resid = gv - project(c.set, gv);
    out.penalty = rho * resid.squaredNorm();
    phi_a += rho * eval_mat(d.g_xa, ends).transpose() * (2.0 * resid);
    phi_b += rho * eval_mat(d.g_xb, ends).transpose() * (2.0 * resid);
  }

  const FracWeights w(spec.alpha(), g.step(), N);
  const std::vector<double> mu = midpoint_weights(spec.alpha(), g.step(), N);
  out.grad_y = phi_a + phi_b + lx.colwise().sum().transpose();
  for (std::size_t j = 0; j < N; ++j) {
    const auto r = static_cast<Eigen::Index>(j);
    out.grad_u.row(r) += w[N - 1 - j] * phi_b.transpose();
    for (std::size_t m = j; m < N; ++m) out.grad_u.row(r) += mu[m - j] * lx.row(static_cast<Eigen::Index>(m));
  }
  return out;
}

/// sqrt(sum_m |grad_u[m]|^2 / h + |grad_y|^2): the gradient norm in the L2 metric on u.
inline double l2_grad_norm(const RowMat& grad_u, const Vec& grad_y, double h) {
  return std::sqrt(grad_u.squaredNorm() / h + grad_y.squaredNorm());
}

inline double feasibility(const ProblemSpec& spec, const TrajectoryPair& traj) {
  const auto& c = spec.constraint();
  if (!c) return 0.0;
  const Vec xb = final_state(traj.u, traj.y, spec.alpha());
  return dist(c->set, eval_vec(c->g, endpoint_env(traj.y, xb)));
}

/// Packs (u, y) into z = (sqrt(h) u_0, ..., sqrt(h) u_{N-1}, y).
class Packing {
 public:
  Packing(const Grid& g, std::size_t dim) : grid_(g), n_(static_cast<Eigen::Index>(dim)), sh_(std::sqrt(g.step())) {}

  Eigen::Index size() const { return static_cast<Eigen::Index>(grid_.n_cells()) * n_ + n_; }

  Vec pack(const TrajectoryPair& t) const {
    Vec z(size());
    const auto N = static_cast<Eigen::Index>(grid_.n_cells());
    for (Eigen::Index m = 0; m < N; ++m) z.segment(m * n_, n_) = sh_ * t.u.values().row(m).transpose();
    z.tail(n_) = t.y;
    return z;
  }

  TrajectoryPair unpack(const Vec& z, double radius) const {
    const auto N = static_cast<Eigen::Index>(grid_.n_cells());
    RowMat u(N + 1, n_);
    for (Eigen::Index m = 0; m < N; ++m) u.row(m) = z.segment(m * n_, n_).transpose() / sh_;
    u.row(N) = u.row(N - 1);
    return TrajectoryPair(GridFn(grid_, std::move(u)), z.tail(n_), radius);
  }

  Vec pack_gradient(const RowMat& gu, const Vec& gy) const {
    Vec out(size());
    for (Eigen::Index m = 0; m < gu.rows(); ++m) out.segment(m * n_, n_) = gu.row(m).transpose() / sh_;
    out.tail(n_) = gy;
    return out;
  }

  /// Each cell value of u into the ball of radius R; y is unconstrained.
  Vec project(Vec z, double radius) const {
    const double r = radius * sh_;
    const auto N = static_cast<Eigen::Index>(grid_.n_cells());
    for (Eigen::Index m = 0; m < N; ++m) {
      auto seg = z.segment(m * n_, n_);
      const double nrm = seg.norm();
      if (nrm > r) seg *= r / nrm;
    }
    return z;
  }

 private:
  Grid grid_;
  Eigen::Index n_;
  double sh_;
};

struct StageOutcome {
  Vec z;
  int iterations = 0;
  double grad_norm = 0.0;
  SolveStatus status = SolveStatus::MaxIters;
};

/// Projected L-BFGS on Phi + rho d_S^2 from z0 (already feasible for the ball).
inline StageOutcome run_stage(const ProblemSpec& spec, const SolverConfig& cfg, const Packing& pk, Vec z,
                              double rho, double tol) {
  auto eval = [&](const Vec& zz, Vec* grad) -> double {
    try {
      const ValueGrad vg = value_and_gradient(spec, pk.unpack(zz, cfg.radius), rho);
      const double f = vg.value + vg.penalty;
      if (!std::isfinite(f)) return std::numeric_limits<double>::infinity();
      if (grad) *grad = pk.pack_gradient(vg.grad_u, vg.grad_y);
      return f;
    } catch (const EvalError&) {
      return std::numeric_limits<double>::infinity();
    } catch (const DomainError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  StageOutcome out;
  Vec grad;
  double f = eval(z, &grad);
  if (!std::isfinite(f)) {
    out.z = z;
    out.status = SolveStatus::Diverged;
    return out;
  }
  std::deque<std::pair<Vec, Vec>> hist;  // (s, y) pairs, newest last

  auto stationarity = [&](const Vec& zz, const Vec& gg) { return (zz - pk.project(zz - gg, cfg.radius)).norm(); };

  for (int it = 0;; ++it) {
    out.grad_norm = stationarity(z, grad);
    if (out.grad_norm <= tol) {
      out.status = SolveStatus::Converged;
      break;
    }
    if (it >= cfg.max_iters) {
      out.status = SolveStatus::MaxIters;
      break;
    }

    // Two-loop recursion.
    Vec dir = -grad;
    if (!hist.empty()) {
      std::vector<double> a(hist.size());
      Vec q = grad;
      for (std::size_t i = hist.size(); i-- > 0;) {
        const auto& [s, yv] = hist[i];
        a[i] = s.dot(q) / yv.dot(s);
        q -= a[i] * yv;
      }
      const auto& [sl, yl] = hist.back();
      q *= sl.dot(yl) / yl.squaredNorm();
      for (std::size_t i = 0; i < hist.size(); ++i) {
        const auto& [s, yv] = hist[i];
        const double b = yv.dot(q) / yv.dot(s);
        q += (a[i] - b) * s;
      }
      dir = -q;
    }

    bool accepted = false;
    Vec z_new, g_new;
    double f_new = f;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      if (attempt == 1) {
        if (hist.empty()) break;
        hist.clear();
        dir = -grad;
      }
      if (grad.dot(dir) >= 0.0) {
        hist.clear();
        dir = -grad;
      }
      double step = hist.empty() ? std::min(1.0, 1.0 / grad.norm()) : 1.0;
      for (int bt = 0; bt < 80; ++bt, step *= cfg.shrink) {
        z_new = pk.project(z + step * dir, cfg.radius);
        const Vec delta = z_new - z;
        if (delta.norm() == 0.0) break;
        f_new = eval(z_new, nullptr);
        if (f_new <= f + cfg.sufficient_decrease * grad.dot(delta)) {
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) {
      out.status = SolveStatus::Stalled;
      break;
    }
    f_new = eval(z_new, &g_new);
    const Vec s = z_new - z;
    const Vec yv = g_new - grad;
    if (cfg.memory > 0 && s.dot(yv) > 1e-12 * s.norm() * yv.norm()) {
      hist.emplace_back(s, yv);
      if (static_cast<int>(hist.size()) > cfg.memory) hist.pop_front();
    }
    z = std::move(z_new);
    grad = std::move(g_new);
    f = f_new;
    out.iterations = it + 1;
  }
  out.z = std::move(z);
  return out;
}

}  // namespace detail

/// Gradient of Phi: grad_u (row N zero) and grad_y, with
/// sum_m <grad_u[m], delta_u[m]> + <grad_y, delta_y> = gateaux_first(delta).
inline std::pair<GridFn, Vec> objective_gradient(const ProblemSpec& spec, const TrajectoryPair& traj) {
  detail::ValueGrad vg = detail::value_and_gradient(spec, traj, 0.0);
  RowMat gu = RowMat::Zero(vg.grad_u.rows() + 1, vg.grad_u.cols());
  gu.topRows(vg.grad_u.rows()) = vg.grad_u;
  return {GridFn(spec.grid(), std::move(gu)), std::move(vg.grad_y)};
}

/// u = 0 and y = x_a when the initial point is pinned, otherwise y = 0.
inline TrajectoryPair default_initial(const ProblemSpec& spec) {
  TrajectoryPair t = TrajectoryPair::zero(spec.grid(), spec.dim());
  if (spec.constraint() && spec.constraint()->fixed_initial) t.y = *spec.constraint()->fixed_initial;
  return t;
}

inline SolveResult solve(const ProblemSpec& spec, const SolverConfig& cfg,
                         const std::optional<TrajectoryPair>& initial = std::nullopt) {
  if (const auto p = cfg.problems(); !p.empty()) throw DomainError("solver config: " + p.front());
  if (const auto v = validate(spec); !v.empty()) throw DomainError("problem: " + v.front().path + ": " + v.front().message);
  TrajectoryPair start = initial ? *initial : default_initial(spec);
  detail::check_traj(spec, start, "solve");

  const detail::Packing pk(spec.grid(), spec.dim());
  Vec z = pk.project(pk.pack(start), cfg.radius);
  const bool penalized = spec.constraint() && spec.constraint()->kind != ConstraintKind::Free;

  std::vector<std::pair<double, double>> plan;  // (rho, epsilon)
  if (penalized) {
    for (std::size_t k = 0; k < cfg.epsilon_schedule.size(); ++k) plan.emplace_back(cfg.penalty_weights[k], cfg.epsilon_schedule[k]);
  } else {
    plan.emplace_back(0.0, cfg.epsilon_schedule.back());
  }

  std::vector<StageInfo> stages;
  int iterations = 0;
  SolveStatus status = SolveStatus::MaxIters;
  for (const auto& [rho, eps] : plan) {
    const double tol = std::max(cfg.grad_tol, std::sqrt(eps) * cfg.grad_scale);
    detail::StageOutcome st = detail::run_stage(spec, cfg, pk, std::move(z), rho, tol);
    z = std::move(st.z);
    iterations += st.iterations;
    status = st.status;
    StageInfo info;
    info.penalty_weight = rho;
    info.epsilon = eps;
    info.iterations = st.iterations;
    info.grad_norm = st.grad_norm;
    info.feasibility_distance = detail::feasibility(spec, pk.unpack(z, cfg.radius));
    info.status = st.status;
    stages.push_back(info);
    if (status == SolveStatus::Diverged) break;
  }

  TrajectoryPair traj = pk.unpack(z, cfg.radius);
  const double objective = bolza_eval(spec, traj);
  const detail::ValueGrad vg = detail::value_and_gradient(spec, traj, 0.0);
  const double gnorm = detail::l2_grad_norm(vg.grad_u, vg.grad_y, spec.grid().step());
  ResidualReport report = residual_report(spec, traj);
  return SolveResult{.traj = std::move(traj),
                     .objective = objective,
                     .feasibility_distance = stages.back().feasibility_distance,
                     .report = std::move(report),
                     .iterations = iterations,
                     .converged = status == SolveStatus::Converged,
                     .grad_norm = gnorm,
                     .status = status,
                     .stages = std::move(stages)};
}

struct NonexistenceDiagnostic {
  bool applicable = false;
  bool flag = false;       // |d phi / d xb| > 0 at the candidate
  double residual = 0.0;   // transversality residual at b, equal to |d phi / d xb|
  std::string note;
};

/// For alpha < 1 and beta > alpha the endpoint integral at b vanishes for
/// every admissible candidate, so a nonzero d phi / d xb cannot be balanced.
inline NonexistenceDiagnostic nonexistence_diagnostic(const ProblemSpec& spec, const TrajectoryPair& traj) {
  NonexistenceDiagnostic out;
  if (!(spec.alpha() < 1.0 && spec.beta() > spec.alpha())) {
    out.note = "not applicable: requires alpha < 1 and beta > alpha";
    return out;
  }
  detail::check_traj(spec, traj, "nonexistence_diagnostic");
  out.applicable = true;
  const Vec xb = detail::final_state(traj.u, traj.y, spec.alpha());
  const Vec phi_b = detail::eval_vec(spec.derivatives().phi_xb, detail::endpoint_env(traj.y, xb));
  out.residual = phi_b.norm();
  out.flag = out.residual > 0.0;
  out.note = out.flag ? "transversality at b is unsatisfiable: no minimizer in the admissible class"
                      : "d phi / d xb vanishes at the candidate";
  return out;
}

inline NonexistenceDiagnostic nonexistence_diagnostic(const ProblemSpec& spec, const SolveResult& result) {
  return nonexistence_diagnostic(spec, result.traj);
}

}  // namespace fracvar
