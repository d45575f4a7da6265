#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

#include "mfg/fourier.hpp"

namespace mfg {

enum class Direction { forward, backward };

/// exp(Delta t_i) s, i.e. coefficients exp(-|k|^2 t_i) c_k.
template <typename Real>
SpectralField<Real> heat_forward(const Snapshot<Real>& s, const TimeGrid<Real>& grid) {
  SpectralField<Real> out(grid, s.lattice());
  const ModeLattice& lat = s.lattice();
  for (Index i = 0; i < grid.samples(); ++i)
    for (Index k = 0; k < lat.size(); ++k)
      out.coeffs()(i, k) = std::exp(-Real(lat.norm_squared(k)) * grid.time(i)) * s.coeffs()(k);
  return out;
}

/// exp(Delta (T - t_i)) s.
template <typename Real>
SpectralField<Real> heat_backward(const Snapshot<Real>& s, const TimeGrid<Real>& grid) {
  SpectralField<Real> out(grid, s.lattice());
  const ModeLattice& lat = s.lattice();
  const Index last = grid.samples() - 1;
  for (Index i = 0; i < grid.samples(); ++i)
    for (Index k = 0; k < lat.size(); ++k)
      out.coeffs()(i, k) = std::exp(-Real(lat.norm_squared(k)) * grid.time(last - i)) * s.coeffs()(k);
  return out;
}

/// Exponential-kernel weights for one interval of length h against the
/// linear interpolant of the integrand:
///   int_0^h exp(-lambda tau) [far * tau/h + near * (1 - tau/h)] dtau
///     = far_weight * far + near_weight * near,
/// where `near` is the endpoint value at tau = 0.
template <typename Real>
struct KernelWeights {
  Real decay;        // exp(-lambda h)
  Real near_weight;  // h int_0^1 exp(-z s)(1 - s) ds
  Real far_weight;   // h int_0^1 exp(-z s) s ds

  static KernelWeights make(Real lambda, Real h) {
    using std::exp;
    using std::expm1;
    const Real z = lambda * h;
    Real a0, a1;  // int_0^1 exp(-z s) ds, int_0^1 s exp(-z s) ds
    if (z < Real(0.5)) {
      a0 = a1 = Real(0);
      Real term(1);  // (-z)^n / n!
      for (int n = 0; n < 30; ++n) {
        a0 += term / Real(n + 1);
        a1 += term / Real(n + 2);
        term *= -z / Real(n + 1);
      }
    } else {
      const Real e = exp(-z);
      a0 = -expm1(-z) / z;
      a1 = (Real(1) - e - z * e) / (z * z);
    }
    return {exp(-z), h * (a0 - a1), h * a1};
  }
};

namespace detail {

template <typename Real>
void require_mean_zero(const SpectralField<Real>& h, const char* who) {
  if (!h.mean_zero()) throw std::domain_error(std::string(who) + ": integrand must be mean-zero at every time");
}

}  // namespace detail

/// I+ h (t_i) = int_0^{t_i} exp(Delta (t_i - s)) h(s) ds by product integration:
/// h is linear between samples and the heat kernel is integrated exactly.
template <typename Real>
SpectralField<Real> integrate_forward(const SpectralField<Real>& h) {
  detail::require_mean_zero(h, "integrate_forward");
  const ModeLattice& lat = h.lattice();
  const TimeGrid<Real>& grid = h.grid();
  SpectralField<Real> out(grid, lat);
  const Index n = grid.intervals();
  for (Index k = 0; k < lat.size(); ++k) {
    if (k == lat.zero_index()) continue;
    const auto w = KernelWeights<Real>::make(Real(lat.norm_squared(k)), grid.step());
    std::complex<Real> acc(0);
    for (Index i = 0; i < n; ++i) {
      acc = w.decay * acc + w.far_weight * h.coeffs()(i, k) + w.near_weight * h.coeffs()(i + 1, k);
      out.coeffs()(i + 1, k) = acc;
    }
  }
  return out;
}

/// I- h (t_i) = int_{t_i}^T exp(Delta (s - t_i)) h(s) ds, same rule run backwards.
template <typename Real>
SpectralField<Real> integrate_backward(const SpectralField<Real>& h) {
  detail::require_mean_zero(h, "integrate_backward");
  const ModeLattice& lat = h.lattice();
  const TimeGrid<Real>& grid = h.grid();
  SpectralField<Real> out(grid, lat);
  const Index n = grid.intervals();
  for (Index k = 0; k < lat.size(); ++k) {
    if (k == lat.zero_index()) continue;
    const auto w = KernelWeights<Real>::make(Real(lat.norm_squared(k)), grid.step());
    std::complex<Real> acc(0);
    for (Index i = n; i > 0; --i) {
      acc = w.decay * acc + w.far_weight * h.coeffs()(i, k) + w.near_weight * h.coeffs()(i - 1, k);
      out.coeffs()(i - 1, k) = acc;
    }
  }
  return out;
}

template <typename Real>
SpectralField<Real> integrate(Direction dir, const SpectralField<Real>& h) {
  return dir == Direction::forward ? integrate_forward(h) : integrate_backward(h);
}

/// I_T h: the final slice of I+ h.
template <typename Real>
Snapshot<Real> integrate_to_horizon(const SpectralField<Real>& h) {
  return integrate_forward(h).slice(h.samples() - 1);
}

/// 2T / (T - 2 alpha) + 2, the bound on ||I^pm||: B_alpha^j -> B_alpha^{j+2}.
template <typename Real>
Real smoothing_bound(const TimeGrid<Real>& grid) {
  return Real(2) * grid.horizon() / (grid.horizon() - Real(2) * grid.alpha()) + Real(2);
}

struct OperatorNormEstimate {
  double random_max = 0.0;  // best ratio over random inputs
  double sweep_max = 0.0;   // best ratio over the single-mode sweep
  double bound = 0.0;
  int violations = 0;       // inputs whose ratio exceeded the bound

  double value() const { return random_max > sweep_max ? random_max : sweep_max; }
};

/// Random real mean-zero field with decaying coefficients and independent samples in time.
template <typename Real>
SpectralField<Real> random_mean_zero_field(const TimeGrid<Real>& grid, const ModeLattice& lat, std::mt19937_64& rng,
                                           Real decay = Real(0.3)) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  SpectralField<Real> f(grid, lat);
  const Real smoothness = Real(uni(rng));  // how strongly samples are correlated in time
  for (Index k = lat.zero_index() + 1; k < lat.size(); ++k) {
    const Real weight = std::exp(-decay * Real(lat.norm(k)) * Real(uni(rng) * 2.0));
    std::complex<Real> base(Real(normal(rng)), Real(normal(rng)));
    for (Index i = 0; i < grid.samples(); ++i) {
      const std::complex<Real> noise(Real(normal(rng)), Real(normal(rng)));
      const std::complex<Real> c = weight * (smoothness * base + (Real(1) - smoothness) * noise);
      f.coeffs()(i, k) = c;
      f.coeffs()(i, lat.mirror(k)) = std::conj(c);
    }
  }
  return f;
}

/// Lower bound on the discrete operator norm of I^pm from B_alpha^j to
/// B_alpha^{j+2}: the largest ratio over `trials` random mean-zero inputs and
/// a deterministic sweep of single-mode inputs (each nonzero mode with the
/// extremal profile exp(-beta(s)|k|) and with a constant profile).
template <typename Real>
OperatorNormEstimate estimate_operator_norm(Direction dir, const TimeGrid<Real>& grid, const ModeLattice& lat, int j,
                                            int trials, std::uint64_t seed = 20240611u) {
  if (trials < 1) throw std::invalid_argument("estimate_operator_norm: trials must be >= 1");
  OperatorNormEstimate est;
  est.bound = double(smoothing_bound(grid));
  auto ratio = [&](const SpectralField<Real>& h) {
    const Real in = space_time_norm(h, j);
    const double r = double(space_time_norm(integrate(dir, h), j + 2) / in);
    if (r > est.bound) ++est.violations;
    return r;
  };

  std::mt19937_64 rng(seed);
  for (int t = 0; t < trials; ++t) est.random_max = std::max(est.random_max, ratio(random_mean_zero_field(grid, lat, rng)));

  for (Index k = lat.zero_index() + 1; k < lat.size(); ++k) {
    for (int profile = 0; profile < 2; ++profile) {
      SpectralField<Real> h(grid, lat);
      for (Index i = 0; i < grid.samples(); ++i) {
        const Real v = profile == 0 ? std::exp(-grid.beta(i) * Real(lat.norm(k))) : Real(1);
        h.coeffs()(i, k) = v;
        h.coeffs()(i, lat.mirror(k)) = v;
      }
      est.sweep_max = std::max(est.sweep_max, ratio(h));
    }
  }
  return est;
}

}  // namespace mfg
