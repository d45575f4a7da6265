#include "mfg/verification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "mfg/heat.hpp"

namespace mfg {

bool AuditReport::decay_pass(double from, double to) const {
  return std::all_of(decay.begin(), decay.end(),
                     [&](const DecaySample& d) { return d.time < from || d.time > to || d.pass; });
}

namespace {

Slice density_slice(const Slice& mu, double mbar) {
  Slice m = mu;
  m.coeffs()(m.lattice().zero_index()) += mbar;
  return m;
}

/// (slope, degenerate) for one slice.
std::pair<double, bool> slope_of(const Slice& s) {
  try {
    return {decay_fit(s).slope, false};
  } catch (const DegenerateFit&) {
    return {0.0, true};
  }
}

Slice terminal_target(const ProblemData& data, const Slice& mu_T) {
  return data.kind == ProblemKind::payoff ? data.payoff.apply(mu_T) : data.terminal_w;
}

double terminal_mean_target(const ProblemData& data, const Slice& mu_T) {
  return data.kind == ProblemKind::payoff ? data.payoff.terminal_mean(mu_T) : data.terminal_u_mean;
}

/// div((mu + mbar) Theta(Dw, mu)) at one instant.
Slice transport_slice(const HamiltonianModel& model, const Slice& w, const Slice& mu) {
  const auto dw = gradient(w);
  const auto theta = eval_theta(model, dw, mu);
  const Slice m = density_slice(mu, model.mbar());
  std::vector<Slice> flux;
  for (const auto& c : theta) flux.push_back(product(c, m));
  return divergence(std::span<const Slice>(flux));
}

Slice hamiltonian_slice(const HamiltonianModel& model, const Slice& w, const Slice& mu) {
  const auto dw = gradient(w);
  return eval_hamiltonian(model, dw, mu);
}

}  // namespace

AuditReport audit(const Solution& sol, const ProblemData& data, int points) {
  AuditReport rep;
  rep.positivity_min = std::numeric_limits<double>::infinity();
  const Grid& grid = sol.mu.grid();
  const Index zero = sol.mu.lattice().zero_index();
  for (Index i = 0; i < grid.samples(); ++i) {
    const Slice mu = sol.mu.slice(i);
    const Slice m = density_slice(mu, data.mbar());
    rep.mass_deviation = std::max(rep.mass_deviation, std::abs(m.coeffs()(zero) - std::complex<double>(data.mbar())));
    rep.positivity_min = std::min(rep.positivity_min, sample_physical(m, points).minCoeff());

    DecaySample d;
    d.time = grid.time(i);
    d.beta = grid.beta(i);
    const auto [ms, mdeg] = slope_of(mu);
    const auto [ws, wdeg] = slope_of(sol.w.slice(i));
    d.slope = ms;
    d.w_slope = ws;
    d.degenerate = mdeg || wdeg;
    const double limit = -d.beta + decay_slope_tolerance;
    d.pass = (mdeg || ms <= limit) && (wdeg || ws <= limit);
    rep.decay.push_back(d);
  }
  return rep;
}

ResidualReport residual_pde(const Solution& sol, const ProblemData& data, double eps) {
  const Grid& grid = sol.mu.grid();
  if (grid.intervals() < 4) throw std::invalid_argument("residual_pde: need at least 4 time intervals");
  if (!(grid == data.grid) || !(sol.mu.lattice() == data.lattice))
    throw std::invalid_argument("residual_pde: solution does not match the problem grid");
  ResidualReport rep;
  const ModeLattice& lat = data.lattice;
  const double h = grid.step();
  const Field u = sol.u();
  const Field m = sol.m();
  const HamiltonianModel& model = data.model;

  for (Index i = 1; i < grid.intervals(); ++i) {
    Slice hs(lat), ds(lat);
    if (!model.is_zero() && eps != 0.0) {
      const Slice w = sol.w.slice(i);
      const Slice mu = sol.mu.slice(i);
      hs = hamiltonian_slice(model, w, mu);
      ds = transport_slice(model, w, mu);
    }
    for (Index k = 0; k < lat.size(); ++k) {
      const double lh = lat.norm_squared(k) * h;
      const double up = std::exp(lh), down = std::exp(-lh);
      const auto hjb = (down * u.coeffs()(i + 1, k) - up * u.coeffs()(i - 1, k)) / (2.0 * h) + eps * hs.coeffs()(k);
      const auto fp = (up * m.coeffs()(i + 1, k) - down * m.coeffs()(i - 1, k)) / (2.0 * h) + eps * ds.coeffs()(k);
      rep.hjb_residual = std::max(rep.hjb_residual, std::abs(hjb));
      rep.fp_residual = std::max(rep.fp_residual, std::abs(fp));
    }
  }

  const Index last = grid.samples() - 1;
  const Slice mu_T = sol.mu.slice(last);
  rep.initial_error = (sol.mu.slice(0).coeffs() - data.mu0.coeffs()).cwiseAbs().maxCoeff();
  rep.terminal_error = (sol.w.slice(last).coeffs() - terminal_target(data, mu_T).coeffs()).cwiseAbs().maxCoeff();
  rep.terminal_mean_error = std::abs(sol.u_mean[last] - terminal_mean_target(data, mu_T));
  rep.audit = audit(sol, data);
  return rep;
}

Slice convolution_oracle(const Slice& f, const Slice& g) {
  if (!(f.lattice() == g.lattice())) throw std::invalid_argument("convolution_oracle: lattice mismatch");
  const ModeLattice& lat = f.lattice();
  const int n = lat.dim();
  Slice out(lat);
  std::vector<int> diff(n);
  for (Index k = 0; k < lat.size(); ++k) {
    std::complex<double> acc(0.0);
    for (Index j = 0; j < lat.size(); ++j) {
      for (int d = 0; d < n; ++d) diff[d] = lat.component(k, d) - lat.component(j, d);
      if (!lat.contains(diff)) continue;
      acc += f.coeffs()(lat.index(diff)) * g.coeffs()(j);
    }
    out.coeffs()(k) = acc;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Oracle time stepper

namespace {

/// Coefficients of one ETD2RK step for y' = -lambda y + N:
///   a = e y + p1 N(y),  y+ = a + p2 (N(a) - N(y)),
/// with p1 = h phi1(-lambda h), p2 = h phi2(-lambda h).
struct EtdStep {
  double e, p1, p2;

  static EtdStep make(double lambda, double h) {
    const double z = -lambda * h;
    double phi1, phi2;
    if (std::abs(z) < 1e-2) {
      // Taylor: phi1 = sum z^n/(n+1)!, phi2 = sum z^n/(n+2)!
      phi1 = 1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0 + z * z * z * z / 120.0;
      phi2 = 0.5 + z / 6.0 + z * z / 24.0 + z * z * z / 120.0 + z * z * z * z / 720.0;
    } else {
      phi1 = std::expm1(z) / z;
      phi2 = (std::expm1(z) - z) / (z * z);
    }
    return {std::exp(z), h * phi1, h * phi2};
  }
};

class Sweeper {
 public:
  Sweeper(const ProblemData& data, double eps, int substeps)
      : data_(data), eps_(eps), fine_(data.grid.refined(substeps)), lat_(data.lattice) {
    for (Index k = 0; k < lat_.size(); ++k) steps_.push_back(EtdStep::make(lat_.norm_squared(k), fine_.step()));
  }

  const Grid& fine() const { return fine_; }

  /// mu on the fine grid with u frozen.
  Field forward(const Field& u) const {
    Field mu(fine_, lat_);
    Slice y = data_.mu0;
    mu.set_slice(0, y);
    for (Index i = 0; i < fine_.intervals(); ++i) {
      const Slice ny = fp_rhs(u.slice(i), y);
      Slice a = stage(y, ny);
      const Slice na = fp_rhs(u.slice(i + 1), a);
      y = correct(a, na, ny);
      mu.set_slice(i + 1, y);
    }
    return mu;
  }

  /// u (with its mean) on the fine grid with mu frozen, integrated in reversed time.
  Field backward(const Field& mu) const {
    Field u(fine_, lat_);
    const Index last = fine_.samples() - 1;
    const Slice mu_T = mu.slice(last);
    Slice y = terminal_target(data_, mu_T);
    y.coeffs()(lat_.zero_index()) += terminal_mean_target(data_, mu_T);
    u.set_slice(last, y);
    for (Index i = last; i > 0; --i) {
      const Slice ny = hjb_rhs(y, mu.slice(i));
      Slice a = stage(y, ny);
      const Slice na = hjb_rhs(a, mu.slice(i - 1));
      y = correct(a, na, ny);
      u.set_slice(i - 1, y);
    }
    return u;
  }

  /// Initial guess: heat flow of the data.
  std::pair<Field, Field> heat_guess() const {
    Field mu(fine_, lat_), u(fine_, lat_);
    const Index last = fine_.samples() - 1;
    for (Index i = 0; i < fine_.samples(); ++i)
      for (Index k = 0; k < lat_.size(); ++k)
        mu.coeffs()(i, k) = std::exp(-lat_.norm_squared(k) * fine_.time(i)) * data_.mu0.coeffs()(k);
    const Slice mu_T = mu.slice(last);
    Slice target = terminal_target(data_, mu_T);
    target.coeffs()(lat_.zero_index()) += terminal_mean_target(data_, mu_T);
    for (Index i = 0; i < fine_.samples(); ++i)
      for (Index k = 0; k < lat_.size(); ++k)
        u.coeffs()(i, k) = std::exp(-lat_.norm_squared(k) * (fine_.horizon() - fine_.time(i))) * target.coeffs()(k);
    return {std::move(mu), std::move(u)};
  }

 private:
  Slice fp_rhs(const Slice& u, const Slice& mu) const {
    if (data_.model.is_zero() || eps_ == 0.0) return Slice(lat_);
    Slice w = project_mean_zero(u);
    return -eps_ * transport_slice(data_.model, w, mu);
  }

  Slice hjb_rhs(const Slice& u, const Slice& mu) const {
    if (data_.model.is_zero() || eps_ == 0.0) return Slice(lat_);
    return eps_ * hamiltonian_slice(data_.model, project_mean_zero(u), mu);
  }

  Slice stage(const Slice& y, const Slice& ny) const {
    Slice a(lat_);
    for (Index k = 0; k < lat_.size(); ++k) a.coeffs()(k) = steps_[k].e * y.coeffs()(k) + steps_[k].p1 * ny.coeffs()(k);
    return a;
  }

  Slice correct(Slice a, const Slice& na, const Slice& ny) const {
    for (Index k = 0; k < lat_.size(); ++k) a.coeffs()(k) += steps_[k].p2 * (na.coeffs()(k) - ny.coeffs()(k));
    return a;
  }

  const ProblemData& data_;
  double eps_;
  Grid fine_;
  ModeLattice lat_;
  std::vector<EtdStep> steps_;
};

Field subsample(const Field& fine, const Grid& coarse, int factor) {
  Field out(coarse, fine.lattice());
  for (Index i = 0; i < coarse.samples(); ++i) out.set_slice(i, fine.slice(i * factor));
  return out;
}

}  // namespace

OracleResult oracle_time_stepper(const ProblemData& data, double eps, const OracleOptions& options) {
  if (options.substeps < 1) throw std::invalid_argument("oracle_time_stepper: substeps must be >= 1");
  if (!(options.damping > 0.0 && options.damping <= 1.0))
    throw std::invalid_argument("oracle_time_stepper: damping must lie in (0, 1]");
  const Sweeper sweeper(data, eps, options.substeps);
  auto [mu, u] = sweeper.heat_guess();

  int sweeps = 0;
  bool converged = false;
  double last_change = 0.0;
  std::string message;
  for (int s = 1; s <= options.max_sweeps; ++s) {
    Field mu_new = sweeper.forward(u);
    Field u_new = sweeper.backward(mu_new);
    const double change =
        std::max((mu_new.coeffs() - mu.coeffs()).cwiseAbs().maxCoeff(), (u_new.coeffs() - u.coeffs()).cwiseAbs().maxCoeff());
    sweeps = s;
    last_change = change;
    if (!std::isfinite(change)) {
      message = "oracle diverged at sweep " + std::to_string(s);
      break;
    }
    if (change < options.tol) {
      mu = std::move(mu_new);
      u = std::move(u_new);
      converged = true;
      break;
    }
    mu += options.damping * (mu_new - mu);
    u += options.damping * (u_new - u);
  }
  if (message.empty()) {
    std::ostringstream msg;
    msg << (converged ? "converged" : "no convergence") << " after " << sweeps << " sweeps (change " << last_change
        << ")";
    message = msg.str();
  }

  const Field uc = subsample(u, data.grid, options.substeps);
  Field mc = subsample(mu, data.grid, options.substeps);
  std::vector<double> mean(data.grid.samples());
  for (Index i = 0; i < data.grid.samples(); ++i) mean[i] = uc.coeffs()(i, data.lattice.zero_index()).real();
  return OracleResult{Solution{project_mean_zero(uc), std::move(mc), std::move(mean), data.mbar()}, sweeps, converged,
                      last_change, std::move(message)};
}

}  // namespace mfg
