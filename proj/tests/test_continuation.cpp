#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mfg/heat.hpp"
#include "problems.hpp"

using namespace mfg;
using namespace mfg::testing;

TEST(ApplyF, VanishesAtHeatFlowForZeroEpsilon) {
  const ProblemData data = quadratic_planning(0.3);
  const FieldPair heat = heat_flow(data);
  EXPECT_EQ(pair_norm(apply_F(heat.w, heat.mu, 0.0, data)), 0.0);
}

TEST(ApplyF, ReducesToDisplacementForZeroEpsilon) {
  std::mt19937_64 rng(89);
  const ProblemData data = quadratic_planning(0.3, 16, 6);
  const FieldPair heat = heat_flow(data);
  const Field dw = random_mean_zero_field(data.grid, data.lattice, rng);
  const Field dm = random_mean_zero_field(data.grid, data.lattice, rng);
  const FieldPair f = apply_F(heat.w + dw, heat.mu + dm, 0.0, data);
  EXPECT_LT(max_abs_difference(f.w, dw), 1e-15);
  EXPECT_LT(max_abs_difference(f.mu, dm), 1e-15);
}

TEST(ApplyF, RequiresPlanningData) {
  const ProblemData data = quartic_payoff(0.01, 8, 4);
  const Field z(data.grid, data.lattice);
  EXPECT_THROW(apply_F(z, z, 0.1, data), std::invalid_argument);
}

TEST(SolveAtEpsilon, ZeroEpsilonIsHeatFlowInOneIteration) {
  const ProblemData data = quadratic_planning(0.3);
  const SolveResult r = solve_at_epsilon(0.0, data, std::nullopt, 1e-10, 50);
  ASSERT_TRUE(r.report.converged);
  EXPECT_EQ(r.report.iterations, 1);
  const FieldPair heat = heat_flow(data);
  EXPECT_EQ(max_abs_difference(r.solution.w, heat.w), 0.0);
  EXPECT_EQ(max_abs_difference(r.solution.mu, heat.mu), 0.0);
}

TEST(SolveAtEpsilon, QuarticModelResidualBelowTolerance) {
  const ProblemData data = quartic_planning(0.05);
  const SolveResult r = solve_at_epsilon(0.1, data, std::nullopt, 1e-10, 100);
  ASSERT_TRUE(r.report.converged);
  EXPECT_LT(pair_norm(apply_F(r.solution.w, r.solution.mu, 0.1, data)), 1e-10);
}

TEST(SolveAtEpsilon, LargeDataBothSigns) {
  const ProblemData data = quadratic_planning(0.3);
  for (double eps : {0.05, -0.05}) {
    const SolveResult r = solve_at_epsilon(eps, data, std::nullopt, 1e-10, 100);
    ASSERT_TRUE(r.report.converged) << eps;
    EXPECT_LT(pair_norm(apply_F(r.solution.w, r.solution.mu, eps, data)), 1e-10) << eps;
    EXPECT_LT(r.report.final_residual, 1e-10);
  }
}

TEST(SolveAtEpsilon, AgreesWithPicardOnScaledModel) {
  const double eps = 0.02, tol = 1e-11;
  ProblemData data = quartic_planning(0.01);
  const SolveResult weak = solve_at_epsilon(eps, data, std::nullopt, tol, 100);
  data.model = data.model.scaled(eps);
  PicardOptions o;
  o.tol = tol;
  const SolveResult full = picard_solve(data, o);
  ASSERT_TRUE(weak.report.converged && full.report.converged);
  EXPECT_LT(max_abs_difference(weak.solution.w, full.solution.w), 10 * tol);
  EXPECT_LT(max_abs_difference(weak.solution.mu, full.solution.mu), 10 * tol);
  for (std::size_t i = 0; i < weak.solution.u_mean.size(); ++i)
    EXPECT_NEAR(weak.solution.u_mean[i], full.solution.u_mean[i], 10 * tol);
}

TEST(ContinuationSweep, ZeroModelIsHeatFlowEverywhere) {
  const ModeLattice lat(1, 6);
  const ProblemData data =
      make_planning_problem(make_grid(1.0, 0.25, 16), zero_model(1), cos_x(lat, 0.1), cos_x(lat, 0.5));
  const EpsilonBranch b = continuation_sweep(data, 1.0, 4, 1e-10);
  ASSERT_EQ(b.points.size(), 9u);
  const FieldPair heat = heat_flow(data);
  for (const auto& s : b.solutions) {
    EXPECT_EQ(max_abs_difference(s.w, heat.w), 0.0);
    EXPECT_EQ(max_abs_difference(s.mu, heat.mu), 0.0);
  }
  EXPECT_FALSE(b.epsilon0_estimate());
  EXPECT_EQ(b.slope_fit, 0.0);
}

TEST(ContinuationSweep, BranchIsLinearNearOrigin) {
  const ProblemData data = quadratic_planning(0.3);
  const EpsilonBranch b = continuation_sweep(data, 0.05, 5, 1e-11);
  ASSERT_EQ(b.points.size(), 11u);
  for (std::size_t i = 1; i < b.points.size(); ++i) EXPECT_LT(b.points[i - 1].eps, b.points[i].eps);
  for (const auto& p : b.points) {
    EXPECT_TRUE(p.converged);
    EXPECT_LT(p.residual, 1e-9);
    if (p.eps != 0.0) EXPECT_LE(p.distance_from_heat, 1.1 * b.slope_fit * std::abs(p.eps));
  }
  EXPECT_TRUE(std::isfinite(b.slope_fit));
  EXPECT_GT(b.slope_fit, 0.0);
}

TEST(ContinuationSweep, FindsFailureAndConvergedSetIsInterval) {
  const ProblemData data = quartic_planning(0.5, 32, 8);
  const EpsilonBranch b = continuation_sweep(data, 40.0, 20, 1e-9, 100);
  ASSERT_TRUE(b.epsilon0_estimate());
  EXPECT_GT(*b.epsilon0_estimate(), 0.0);
  // converged points are contiguous steps around 0
  const double h = 2.0;
  for (std::size_t i = 1; i < b.points.size(); ++i) EXPECT_NEAR(b.points[i].eps - b.points[i - 1].eps, h, 1e-12);
  if (b.upper_failure) EXPECT_NEAR(b.upper_failure->eps - b.points.back().eps, h, 1e-12);
  if (b.lower_failure) EXPECT_NEAR(b.points.front().eps - b.lower_failure->eps, h, 1e-12);
}

TEST(ContinuationSweep, RejectsBadArguments) {
  const ProblemData data = quadratic_planning(0.3, 8, 4);
  EXPECT_THROW(continuation_sweep(data, 0.1, 0, 1e-9), std::invalid_argument);
  EXPECT_THROW(continuation_sweep(data, -0.1, 3, 1e-9), std::invalid_argument);
}
