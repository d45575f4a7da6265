#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mfg/fourier.hpp"

namespace mfg {

/// Uniform density 1 / vol(T^n) with vol(T^n) = (2 pi)^n.
double uniform_density(int dim);

/// Momentum part of a polynomial term.
struct MomentumFactor {
  enum class Kind { none, norm_power, monomial };

  Kind kind = Kind::none;
  int power = 0;             // |p|^(2 power) for norm_power
  std::vector<int> indices;  // p_{i_1} ... p_{i_r} for monomial, 0-based

  static MomentumFactor constant() { return {}; }
  static MomentumFactor norm(int q) { return {Kind::norm_power, q, {}}; }
  static MomentumFactor product(std::vector<int> idx) { return {Kind::monomial, 0, std::move(idx)}; }
};

/// scale * a(x) * m^density_power * P(p)
struct PolynomialTerm {
  double scale = 1.0;
  std::optional<Slice> coefficient;  // absent means a = 1
  int density_power = 0;
  MomentumFactor momentum;
};

/// Polynomial Hamiltonian H(x, p, m) with time-independent coefficient fields.
class HamiltonianModel {
 public:
  HamiltonianModel(std::string name, int dim, std::vector<PolynomialTerm> terms);

  const std::string& name() const { return name_; }
  int dim() const { return dim_; }
  double mbar() const { return mbar_; }
  const std::vector<PolynomialTerm>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  /// eps H
  HamiltonianModel scaled(double eps) const;

  /// b(x): the mu-linear coefficient of Xi at (Dw, mu) = (0, 0).
  Slice linear_coefficient(const ModeLattice& lattice) const;

 private:
  std::string name_;
  int dim_;
  double mbar_;
  std::vector<PolynomialTerm> terms_;
};

HamiltonianModel zero_model(int dim);
/// a |p|^4 + m^3
HamiltonianModel separable_quartic(int dim, std::optional<Slice> a = {});
/// a p_i p_j p_k + m^3
HamiltonianModel separable_triple(int dim, std::array<int, 3> idx, std::optional<Slice> a = {});
/// a1 p_i p_j p_k m^ell + a2 m^sigma
HamiltonianModel coupled_triple(int dim, std::array<int, 3> idx, int ell, int sigma, std::optional<Slice> a1 = {},
                                std::optional<Slice> a2 = {});
/// a1 |p|^4 m^ell + a2 m^sigma
HamiltonianModel coupled_quartic(int dim, int ell, int sigma, std::optional<Slice> a1 = {},
                                 std::optional<Slice> a2 = {});
/// m^2 |p|^4 + m^3
HamiltonianModel quartic_cubic(int dim);
/// m^j |p|^2
HamiltonianModel density_quadratic(int dim, int j);
/// a m^sigma
HamiltonianModel density_power(int dim, int sigma, std::optional<Slice> a = {});

// Slice-level evaluation at one instant; m = mu + mbar.
std::vector<Slice> eval_theta(const HamiltonianModel& model, std::span<const Slice> dw, const Slice& mu);
Slice eval_hamiltonian(const HamiltonianModel& model, std::span<const Slice> dw, const Slice& mu);
Slice eval_xi(const HamiltonianModel& model, std::span<const Slice> dw, const Slice& mu);
/// P Upsilon, built from the binomial expansion with the linear density term removed.
Slice eval_upsilon(const HamiltonianModel& model, std::span<const Slice> dw, const Slice& mu);

// Space-time evaluation, slice by slice.
VectorField eval_theta(const HamiltonianModel& model, const VectorField& dw, const Field& mu);
Field eval_hamiltonian(const HamiltonianModel& model, const VectorField& dw, const Field& mu);
Field eval_xi(const HamiltonianModel& model, const VectorField& dw, const Field& mu);

struct LinearSplit {
  Field b;
  Field upsilon;
};
LinearSplit eval_upsilon_b(const HamiltonianModel& model, const VectorField& dw, const Field& mu);

/// Payoff G and its projected, recentred form G~(mu_T) = P G(mu_T + mbar).
class PayoffOperator {
 public:
  enum class Kind { zero, identity, square };

  PayoffOperator() = default;
  explicit PayoffOperator(Kind kind) : kind_(kind) {}
  static PayoffOperator from_name(const std::string& name);

  Kind kind() const { return kind_; }
  std::string name() const;

  /// G~(mu_T), mean-zero.
  Slice apply(const Slice& mu_terminal) const;
  /// Spatial mean of G(mu_T + mbar), the terminal mean of u.
  double terminal_mean(const Slice& mu_terminal) const;

 private:
  Kind kind_ = Kind::identity;
};

Slice eval_payoff(const PayoffOperator& payoff, const Slice& mu_terminal);

struct LipschitzEstimate {
  double theta_ratio = 0.0;     // empirical Phi_1
  double upsilon_ratio = 0.0;   // empirical Phi_2
};

/// Largest Lipschitz ratios of Theta and P Upsilon over random pairs in the
/// B_alpha^2 ball of the given radius. Each random direction is probed at radii
/// radius * 2^-l down to 1e-4, so the probe at r/2 visits a subset of the
/// points visited at r.
LipschitzEstimate lipschitz_probe(const HamiltonianModel& model, const Grid& grid, const ModeLattice& lattice,
                                  double radius, int trials, std::uint64_t seed = 7u);

}  // namespace mfg
