#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fracvar/solver.hpp"
#include "spec_fixtures.hpp"

using namespace fracvar;
using namespace fracvar::testing;

namespace {

double inner(const GridFn& gu, const Vec& gy, const TrajectoryPair& d) {
  return (gu.values().array() * d.u.values().array()).sum() + gy.dot(d.y);
}

double sup_state_error(const TrajectoryPair& traj, double alpha, double (*exact)(double)) {
  const GridFn x = reconstruct_trajectory(traj.u, traj.y, alpha);
  double e = 0.0;
  for (std::size_t k = 0; k < x.rows(); ++k) e = std::max(e, std::abs(x(k, 0) - exact(x.grid().node(k))));
  return e;
}

}  // namespace

TEST(ObjectiveGradient, TransposeOfGateauxFirst) {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 4; ++trial) {
    const double alpha = std::uniform_real_distribution<double>(0.2, 1.0)(rng);
    const double beta = std::uniform_real_distribution<double>(0.3, 2.0)(rng);
    const ProblemSpec spec = random_quadratic_spec(rng, alpha, beta, Grid(0.0, 1.0, 50), 2, trial % 2 == 0);
    const TrajectoryPair x = random_traj(rng, spec.grid(), 2);
    const auto [gu, gy] = objective_gradient(spec, x);
    EXPECT_EQ(gu.row(spec.grid().n_cells()), Vec::Zero(2));
    for (int i = 0; i < 25; ++i) {
      const TrajectoryPair d = random_variation(rng, spec.grid(), 2);
      const double ref = gateaux_first(spec, x, d);
      EXPECT_NEAR(inner(gu, gy, d), ref, 1e-12 * (1.0 + std::abs(ref)));
    }
  }
}

TEST(ObjectiveGradient, CentralDifferences) {
  std::mt19937_64 rng(7);
  const ProblemSpec spec = random_quadratic_spec(rng, 0.6, 0.8, Grid(0.0, 1.0, 40), 2);
  const TrajectoryPair x = random_traj(rng, spec.grid(), 2);
  const auto [gu, gy] = objective_gradient(spec, x);
  std::uniform_int_distribution<std::size_t> cell(0, spec.grid().n_cells() - 1), comp(0, 1);
  const double s = 1e-3;
  for (int i = 0; i < 50; ++i) {
    TrajectoryPair d = TrajectoryPair::zero(spec.grid(), 2);
    double g = 0.0;
    if (i % 10 == 0) {
      const auto c = static_cast<Eigen::Index>(comp(rng));
      d.y[c] = 1.0;
      g = gy[c];
    } else {
      const std::size_t m = cell(rng), c = comp(rng);
      d.u(m, c) = 1.0;
      g = gu(m, c);
    }
    const double fd = (bolza_eval(spec, shifted(x, d, s)) - bolza_eval(spec, shifted(x, d, -s))) / (2.0 * s);
    EXPECT_LE(std::abs(fd - g), 1e-6 * std::max(std::abs(g), 1e-3)) << i;
  }
}

TEST(ObjectiveGradient, Examples) {
  const ProblemSpec spec = classical();
  const auto [gu, gy] = objective_gradient(spec, classical_optimum(spec.grid()));
  EXPECT_LT(detail::l2_grad_norm(gu.values().topRows(spec.grid().n_cells()), gy, spec.grid().step()),
            spec.grid().step());

  std::mt19937_64 rng(3);
  const ProblemSpec no_x = ProblemSpec::from_strings(0.7, 1.3, Grid(0.0, 1.0, 32), 2, "0", "u1^2 + t*u2 + u1*u2");
  EXPECT_EQ(objective_gradient(no_x, random_traj(rng, no_x.grid(), 2)).second, Vec::Zero(2));
}

TEST(Solve, ClassicalExample) {
  const ProblemSpec spec = classical();
  const SolveResult r = solve(spec, SolverConfig{});
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.status, SolveStatus::Converged);
  EXPECT_LE(sup_state_error(r.traj, 1.0, classical_x), 1e-2);
  EXPECT_NEAR(r.objective, classical_value(), 1e-3);
  EXPECT_LT(r.report.transversality_b, 1e-2);
  EXPECT_EQ(r.stages.size(), 1u);
  EXPECT_EQ(r.feasibility_distance, 0.0);
}

TEST(Solve, StraightLine) {
  const ProblemSpec spec = ProblemSpec::from_strings(
      1.0, 1.0, Grid(0.0, 1.0, 128), 1, "0", "0.5*u1^2",
      standard_constraint(ConstraintKind::FixedBoth, 1, Vec::Zero(1), Vec::Ones(1)));
  const SolveResult r = solve(spec, SolverConfig{});
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.feasibility_distance, 1e-6);
  EXPECT_NEAR(r.objective, 0.5, 1e-4);
  EXPECT_LE(sup_state_error(r.traj, 1.0, [](double t) { return t; }), 1e-4);
  ASSERT_TRUE(r.report.psi_in_cone.has_value());
  EXPECT_TRUE(*r.report.psi_in_cone);
  ASSERT_EQ(r.stages.size(), 4u);
  for (std::size_t k = 1; k < r.stages.size(); ++k) {
    EXPECT_LT(r.stages[k].feasibility_distance, r.stages[k - 1].feasibility_distance);
    EXPECT_GT(r.stages[k].penalty_weight, r.stages[k - 1].penalty_weight);
  }
}

TEST(Solve, FreeZeroCost) {
  const ProblemSpec spec = ProblemSpec::from_strings(1.0, 1.0, Grid(0.0, 1.0, 64), 1, "0", "0.5*u1^2");
  std::mt19937_64 rng(5);
  const SolveResult r = solve(spec, SolverConfig{}, random_traj(rng, spec.grid(), 1));
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.objective, 0.0, 1e-10);
  EXPECT_LT(r.traj.u.sup_norm(), 1e-4);
}

TEST(Solve, NonincreasingAcrossIterations) {
  const ProblemSpec spec = classical(0.8, 64, 1.2);
  double prev = bolza_eval(spec, TrajectoryPair::zero(spec.grid(), 1));
  for (int k = 1; k <= 12; ++k) {
    SolverConfig cfg;
    cfg.max_iters = k;
    const SolveResult r = solve(spec, cfg);
    EXPECT_LE(r.objective, prev) << k;
    prev = r.objective;
  }
}

TEST(Solve, IterationLimitAndErrors) {
  const ProblemSpec spec = classical(1.0, 64);
  SolverConfig cfg;
  cfg.max_iters = 1;
  const SolveResult r = solve(spec, cfg);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.status, SolveStatus::MaxIters);
  EXPECT_EQ(r.iterations, 1);

  cfg.max_iters = 0;
  EXPECT_THROW(solve(spec, cfg), DomainError);
  SolverConfig bad;
  bad.epsilon_schedule = {1e-4, 1e-3};
  bad.penalty_weights = {1.0, 2.0};
  EXPECT_FALSE(bad.problems().empty());
  EXPECT_THROW(solve(spec, bad), DomainError);
  EXPECT_THROW(solve(spec.with_alpha(1.5), SolverConfig{}), DomainError);
  EXPECT_THROW(solve(spec, SolverConfig{}, TrajectoryPair::zero(Grid(0.0, 1.0, 8), 1)), DimensionError);
}

TEST(Solve, RadiusIsRespected) {
  const ProblemSpec spec = ProblemSpec::from_strings(1.0, 1.0, Grid(0.0, 1.0, 32), 1, "-10*xb1", "0.5*u1^2");
  SolverConfig cfg;
  cfg.radius = 2.0;
  const SolveResult r = solve(spec, cfg);
  EXPECT_LE(r.traj.u.sup_norm(), 2.0 + 1e-12);
  EXPECT_NEAR(r.traj.u(5, 0), 2.0, 1e-9);
}

TEST(Solve, Deterministic) {
  const ProblemSpec spec = ProblemSpec::from_strings(
      0.75, 1.0, Grid(0.0, 1.0, 64), 1, "xb1^2", "0.5*(x1^2+u1^2) + sin(t)*x1",
      standard_constraint(ConstraintKind::FixedInitial, 1, Vec::Constant(1, 0.5)));
  const SolveResult a = solve(spec, SolverConfig{});
  const SolveResult b = solve(spec, SolverConfig{});
  EXPECT_EQ(a.traj.u.values(), b.traj.u.values());
  EXPECT_EQ(a.traj.y, b.traj.y);
  EXPECT_EQ(a.objective, b.objective);
  EXPECT_EQ(a.iterations, b.iterations);
  EXPECT_EQ(a.report.el_residual_profile.values(), b.report.el_residual_profile.values());
}

TEST(Nonexistence, Examples) {
  std::mt19937_64 rng(6);
  for (double alpha : {0.5, 0.75}) {
    const ProblemSpec spec = classical(alpha, 256);
    const SolveResult r = solve(spec, SolverConfig{});
    EXPECT_EQ(r.report.transversality_b, 1.0);
    const NonexistenceDiagnostic d = nonexistence_diagnostic(spec, r);
    EXPECT_TRUE(d.applicable);
    EXPECT_TRUE(d.flag);
    EXPECT_EQ(d.residual, 1.0);
  }
  const ProblemSpec no_b = ProblemSpec::from_strings(0.5, 1.0, Grid(0.0, 1.0, 32), 1, "xa1^2", "0.5*(x1^2+u1^2)");
  const NonexistenceDiagnostic d = nonexistence_diagnostic(no_b, random_traj(rng, no_b.grid(), 1));
  EXPECT_TRUE(d.applicable);
  EXPECT_FALSE(d.flag);
  EXPECT_FALSE(nonexistence_diagnostic(classical(1.0, 32), TrajectoryPair::zero(Grid(0.0, 1.0, 32), 1)).applicable);
  EXPECT_FALSE(nonexistence_diagnostic(classical(0.5, 32, 0.4), TrajectoryPair::zero(Grid(0.0, 1.0, 32), 1)).applicable);
}
