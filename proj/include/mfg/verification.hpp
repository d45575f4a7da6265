#pragma once

#include <string>
#include <vector>

#include "mfg/fixed_point.hpp"

namespace mfg {

struct DecaySample {
  double time = 0.0;
  double beta = 0.0;
  double slope = 0.0;      // fitted slope of ln|c_k| vs |k| (mu)
  double w_slope = 0.0;    // same for w
  bool degenerate = false; // fewer than 3 usable modes in mu or w
  bool pass = true;        // slope <= -beta + tolerance, or degenerate
};

struct AuditReport {
  double mass_deviation = 0.0;   // max_i |m_0(t_i) - mbar|
  double positivity_min = 0.0;   // min of m over the sampling grid and all samples
  std::vector<DecaySample> decay;

  /// Decay check over samples with t in [from, to].
  bool decay_pass(double from, double to) const;
};

struct ResidualReport {
  double hjb_residual = 0.0;        // sup over interior samples and modes
  double fp_residual = 0.0;
  double initial_error = 0.0;       // sup |mu(0) - mu0|
  double terminal_error = 0.0;      // sup |w(T) - target|
  double terminal_mean_error = 0.0; // |u_mean(T) - target mean|
  AuditReport audit;
};

/// Decay tolerance added to -beta(t) in the analyticity check.
inline constexpr double decay_slope_tolerance = 0.05;

/// Mass, positivity (on a points^n grid) and per-sample decay fits.
AuditReport audit(const Solution& sol, const ProblemData& data, int points = 64);

/// Residuals of u_t + Delta u + eps H = 0 and m_t - Delta m + eps div(m H_p) = 0.
/// Time derivatives are centred differences of the integrating-factor variables
/// exp(-|k|^2 t) u_k and exp(|k|^2 t) m_k, so the diffusion part is differentiated exactly.
ResidualReport residual_pde(const Solution& sol, const ProblemData& data, double eps = 1.0);

/// Direct double-loop convolution truncated to the common lattice.
Slice convolution_oracle(const Slice& f, const Slice& g);

struct OracleOptions {
  int substeps = 16;       // fine steps per coarse interval
  double tol = 1e-12;      // max coefficient change between sweeps
  int max_sweeps = 400;
  double damping = 0.5;
};

struct OracleResult {
  Solution solution;  // on the coarse grid of the problem
  int sweeps = 0;
  bool converged = false;
  double last_change = 0.0;
  std::string message;
};

/// Forward-backward sweeps on a refined grid: mu forward with w frozen, then u
/// backward with the new mu, each by a second-order exponential Runge-Kutta
/// scheme (diffusion exact per mode, Hamiltonian terms explicit).
OracleResult oracle_time_stepper(const ProblemData& data, double eps = 1.0, const OracleOptions& options = {});

}  // namespace mfg
