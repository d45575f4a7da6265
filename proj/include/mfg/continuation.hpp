#pragma once

#include <optional>
#include <vector>

#include "mfg/fixed_point.hpp"

namespace mfg {

/// Residual of the weak-coupling system with Hamiltonian eps H and planning data:
///   (w - e^{Delta(T-t)} wT - eps I-(Xi),  mu - e^{Delta t} mu0 + eps I+ div((mu + mbar) Theta)).
FieldPair apply_F(const Field& w, const Field& mu, double eps, const ProblemData& data);

/// The explicit eps = 0 solution: pure heat flow of the boundary data.
FieldPair heat_flow(const ProblemData& data);

/// Solves F(., eps) = 0 by Picard iteration on
/// (w, mu) <- (e^{Delta(T-t)} wT + eps I- Xi, e^{Delta t} mu0 - eps I+ div((mu + mbar) Theta)).
SolveResult solve_at_epsilon(double eps, const ProblemData& data, const std::optional<FieldPair>& warm_start,
                             double tol, int max_iter);

struct BranchPoint {
  double eps = 0.0;
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;           // ||F(sol, eps)||
  double distance_from_heat = 0.0; // ||sol(eps) - sol(0)||
  double contraction = 0.0;
};

struct EpsilonBranch {
  std::vector<BranchPoint> points;   // increasing eps, converged points only
  std::vector<Solution> solutions;   // aligned with points
  std::optional<BranchPoint> lower_failure;
  std::optional<BranchPoint> upper_failure;
  double slope_fit = 0.0;   // least-squares C in distance = C |eps|
  double max_ratio = 0.0;   // max distance / |eps| over eps != 0

  /// Smallest |eps| at which either direction failed, if any.
  std::optional<double> epsilon0_estimate() const;
};

/// Marches eps = 0, +-h, +-2h, ... to +-eps_max with h = eps_max / steps,
/// warm-starting each solve from its neighbour towards 0. A direction stops at its first failure.
EpsilonBranch continuation_sweep(const ProblemData& data, double eps_max, int steps, double tol, int max_iter = 200);

}  // namespace mfg
