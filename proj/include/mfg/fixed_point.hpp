#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mfg/fourier.hpp"
#include "mfg/hamiltonian.hpp"

namespace mfg {

enum class ProblemKind { payoff, planning };

/// Boundary data and model for one mean field game on [0, T] x T^n.
struct ProblemData {
  ProblemKind kind;
  Grid grid;
  ModeLattice lattice;
  HamiltonianModel model;
  Slice mu0;               // m0 - mbar
  Slice terminal_w;        // P u_T (planning)
  double terminal_u_mean;  // mean of u_T (planning)
  PayoffOperator payoff;   // payoff problems

  double mbar() const { return model.mbar(); }
  /// Whether m0 = mu0 + mbar is nonnegative on the uniform points^n grid.
  bool density_nonnegative(int points = 64) const;
};

ProblemData make_payoff_problem(Grid grid, HamiltonianModel model, Slice mu0, PayoffOperator payoff);
ProblemData make_planning_problem(Grid grid, HamiltonianModel model, Slice mu0, Slice terminal_w,
                                  double terminal_u_mean = 0.0);

/// (w, mu) pair, measured in the B_alpha^2 x B_alpha^2 sum norm.
struct FieldPair {
  Field w;
  Field mu;
};

double pair_norm(const FieldPair& p);
double pair_distance(const FieldPair& a, const FieldPair& b);

/// Converged (w, mu) with the recovered mean of u; u and m are reconstructed on demand.
struct Solution {
  Field w;
  Field mu;
  std::vector<double> u_mean;
  double mbar = 0.0;

  Field u() const;
  Field m() const;
};

struct SolveReport {
  int iterations = 0;
  std::vector<double> update_norms;  // ||x_{i+1} - x_i||
  std::vector<double> ratios;        // update_norms[i+1] / update_norms[i]
  double final_residual = 0.0;       // ||T(x) - x|| at the returned iterate
  double center_norm = 0.0;          // ||a0|| + ||b0||
  double orbit_radius = 0.0;         // empirical r*: max distance of the orbit from the center
  bool converged = false;
  std::string message;
};

struct SolveResult {
  Solution solution;
  SolveReport report;
};

/// (a0, b0) with a0 in the mu slot and b0 in the w slot.
FieldPair ball_center(const ProblemData& data);

Field apply_T1(const Field& w, const Field& mu, const ProblemData& data);
Field apply_T2(const Field& w, const Field& mu, const ProblemData& data);
/// (T2, T1) sharing one Hamiltonian evaluation.
FieldPair apply_map(const FieldPair& x, const ProblemData& data);

struct PicardOptions {
  double tol = 1e-9;
  int max_iter = 200;
  std::optional<FieldPair> start;  // defaults to the ball center
  double blowup = 1e8;             // abort once an update exceeds this norm
};

/// Iterates (w, mu) <- T(w, mu). Non-convergence is reported, not thrown.
SolveResult picard_solve(const ProblemData& data, const PicardOptions& options = {});

/// Mean of u at each sample, integrating d/dt mean(u) = -eps mean(H) backwards
/// from the terminal mean with the trapezoid rule.
std::vector<double> recover_mean_u(const Field& w, const Field& mu, const ProblemData& data, double eps = 1.0);

Solution reconstruct(Field w, Field mu, const ProblemData& data, double eps = 1.0);

/// Largest observed ratio of successive updates; 0 when the first update already vanished.
double contraction_ratio(const SolveReport& report);

/// Shared stopping logic for the Picard loops here and in the continuation module.
template <typename Step>
SolveReport iterate_to_fixed_point(FieldPair& x, const FieldPair& center, const PicardOptions& options, Step&& step);

}  // namespace mfg

#include "mfg/detail/picard_loop.hpp"
