#include "mfg/hamiltonian.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "mfg/heat.hpp"

namespace mfg {

double uniform_density(int dim) { return 1.0 / std::pow(2.0 * std::numbers::pi, dim); }

HamiltonianModel::HamiltonianModel(std::string name, int dim, std::vector<PolynomialTerm> terms)
    : name_(std::move(name)), dim_(dim), mbar_(uniform_density(dim)), terms_(std::move(terms)) {
  for (const auto& t : terms_) {
    if (t.density_power < 0) throw std::invalid_argument("HamiltonianModel: negative density power");
    if (t.momentum.kind == MomentumFactor::Kind::norm_power && t.momentum.power < 1)
      throw std::invalid_argument("HamiltonianModel: |p| power must be >= 1");
    for (int i : t.momentum.indices)
      if (i < 0 || i >= dim) throw std::invalid_argument("HamiltonianModel: momentum index out of range");
    if (t.coefficient && t.coefficient->dim() != dim)
      throw std::invalid_argument("HamiltonianModel: coefficient field dimension mismatch");
  }
}

HamiltonianModel HamiltonianModel::scaled(double eps) const {
  auto terms = terms_;
  for (auto& t : terms) t.scale *= eps;
  return HamiltonianModel(name_, dim_, std::move(terms));
}

Slice HamiltonianModel::linear_coefficient(const ModeLattice& lattice) const {
  Slice b(lattice);
  for (const auto& t : terms_) {
    if (t.momentum.kind != MomentumFactor::Kind::none || t.density_power < 1) continue;
    const double c = t.scale * t.density_power * std::pow(mbar_, t.density_power - 1);
    if (t.coefficient)
      b += c * *t.coefficient;
    else
      b.coeffs()(lattice.zero_index()) += c;
  }
  return b;
}

namespace {

PolynomialTerm term(double scale, std::optional<Slice> a, int ell, MomentumFactor p) {
  return PolynomialTerm{scale, std::move(a), ell, std::move(p)};
}

}  // namespace

HamiltonianModel zero_model(int dim) { return HamiltonianModel("zero", dim, {}); }

HamiltonianModel separable_quartic(int dim, std::optional<Slice> a) {
  return HamiltonianModel("separable_quartic", dim,
                          {term(1.0, std::move(a), 0, MomentumFactor::norm(2)),
                           term(1.0, {}, 3, MomentumFactor::constant())});
}

HamiltonianModel separable_triple(int dim, std::array<int, 3> idx, std::optional<Slice> a) {
  return HamiltonianModel("separable_triple", dim,
                          {term(1.0, std::move(a), 0, MomentumFactor::product({idx[0], idx[1], idx[2]})),
                           term(1.0, {}, 3, MomentumFactor::constant())});
}

HamiltonianModel coupled_triple(int dim, std::array<int, 3> idx, int ell, int sigma, std::optional<Slice> a1,
                                std::optional<Slice> a2) {
  return HamiltonianModel("coupled_triple", dim,
                          {term(1.0, std::move(a1), ell, MomentumFactor::product({idx[0], idx[1], idx[2]})),
                           term(1.0, std::move(a2), sigma, MomentumFactor::constant())});
}

HamiltonianModel coupled_quartic(int dim, int ell, int sigma, std::optional<Slice> a1, std::optional<Slice> a2) {
  return HamiltonianModel("coupled_quartic", dim,
                          {term(1.0, std::move(a1), ell, MomentumFactor::norm(2)),
                           term(1.0, std::move(a2), sigma, MomentumFactor::constant())});
}

HamiltonianModel quartic_cubic(int dim) {
  return HamiltonianModel("quartic_cubic", dim,
                          {term(1.0, {}, 2, MomentumFactor::norm(2)), term(1.0, {}, 3, MomentumFactor::constant())});
}

HamiltonianModel density_quadratic(int dim, int j) {
  return HamiltonianModel("density_quadratic", dim, {term(1.0, {}, j, MomentumFactor::norm(1))});
}

HamiltonianModel density_power(int dim, int sigma, std::optional<Slice> a) {
  return HamiltonianModel("density_power", dim, {term(1.0, std::move(a), sigma, MomentumFactor::constant())});
}

// ---------------------------------------------------------------------------

namespace {

Slice constant_slice(const ModeLattice& lat, double c) {
  Slice s(lat);
  s.coeffs()(lat.zero_index()) = c;
  return s;
}

/// Powers of one slice, built on demand by repeated truncated products.
class PowerCache {
 public:
  explicit PowerCache(Slice base) : powers_{constant_slice(base.lattice(), 1.0), std::move(base)} {}

  const Slice& operator()(int e) {
    while (static_cast<int>(powers_.size()) <= e) powers_.push_back(product(powers_.back(), powers_[1]));
    return powers_[e];
  }

 private:
  std::vector<Slice> powers_;
};

struct MomentumTerms {
  std::span<const Slice> p;
  std::optional<PowerCache> norm_sq;  // powers of |p|^2

  explicit MomentumTerms(std::span<const Slice> dw) : p(dw) {}

  const Slice& norm_sq_power(int q) {
    if (!norm_sq) {
      Slice sq = product(p[0], p[0]);
      for (std::size_t d = 1; d < p.size(); ++d) sq += product(p[d], p[d]);
      norm_sq.emplace(std::move(sq));
    }
    return (*norm_sq)(q);
  }

  Slice value(const MomentumFactor& f) {
    const ModeLattice& lat = p[0].lattice();
    switch (f.kind) {
      case MomentumFactor::Kind::none:
        return constant_slice(lat, 1.0);
      case MomentumFactor::Kind::norm_power:
        return norm_sq_power(f.power);
      case MomentumFactor::Kind::monomial: {
        Slice out = p[f.indices[0]];
        for (std::size_t r = 1; r < f.indices.size(); ++r) out = product(out, p[f.indices[r]]);
        return out;
      }
    }
    return constant_slice(lat, 0.0);
  }

  /// d P / d p_l
  Slice derivative(const MomentumFactor& f, int l) {
    const ModeLattice& lat = p[0].lattice();
    switch (f.kind) {
      case MomentumFactor::Kind::none:
        return Slice(lat);
      case MomentumFactor::Kind::norm_power: {
        // 2q |p|^(2(q-1)) p_l
        Slice out = (2.0 * f.power) * p[l];
        if (f.power > 1) out = product(norm_sq_power(f.power - 1), out);
        return out;
      }
      case MomentumFactor::Kind::monomial: {
        Slice out(lat);
        for (std::size_t r = 0; r < f.indices.size(); ++r) {
          if (f.indices[r] != l) continue;
          Slice part = constant_slice(lat, 1.0);
          for (std::size_t s = 0; s < f.indices.size(); ++s)
            if (s != r) part = product(part, p[f.indices[s]]);
          out += part;
        }
        return out;
      }
    }
    return Slice(lat);
  }
};

Slice density(const Slice& mu, double mbar) {
  Slice m = mu;
  m.coeffs()(m.lattice().zero_index()) += mbar;
  return m;
}

Slice with_coefficient(const PolynomialTerm& t, Slice v) {
  if (t.coefficient) v = product(*t.coefficient, v);
  return t.scale * v;
}

void check_inputs(const HamiltonianModel& model, std::span<const Slice> dw, const Slice& mu) {
  if (static_cast<int>(dw.size()) != model.dim() || mu.dim() != model.dim())
    throw std::invalid_argument("Hamiltonian evaluation: dimension mismatch");
  for (const auto& c : dw)
    if (!(c.lattice() == mu.lattice())) throw std::invalid_argument("Hamiltonian evaluation: lattice mismatch");
}

double binomial(int n, int r) {
  double c = 1.0;
  for (int i = 1; i <= r; ++i) c = c * (n - r + i) / i;
  return c;
}

}  // namespace

std::vector<Slice> eval_theta(const HamiltonianModel& model, std::span<const Slice> dw, const Slice& mu) {
  check_inputs(model, dw, mu);
  const ModeLattice& lat = mu.lattice();
  std::vector<Slice> theta(model.dim(), Slice(lat));
  PowerCache m(density(mu, model.mbar()));
  MomentumTerms p(dw);
  for (const auto& t : model.terms()) {
    if (t.momentum.kind == MomentumFactor::Kind::none) continue;
    for (int l = 0; l < model.dim(); ++l) {
      Slice d = p.derivative(t.momentum, l);
      if (d.coeffs().isZero(0.0)) continue;
      if (t.density_power > 0) d = product(m(t.density_power), d);
      theta[l] += with_coefficient(t, std::move(d));
    }
  }
  return theta;
}

Slice eval_hamiltonian(const HamiltonianModel& model, std::span<const Slice> dw, const Slice& mu) {
  check_inputs(model, dw, mu);
  Slice h(mu.lattice());
  PowerCache m(density(mu, model.mbar()));
  MomentumTerms p(dw);
  for (const auto& t : model.terms()) {
    Slice v = t.momentum.kind == MomentumFactor::Kind::none ? m(t.density_power) : p.value(t.momentum);
    if (t.momentum.kind != MomentumFactor::Kind::none && t.density_power > 0) v = product(m(t.density_power), v);
    h += with_coefficient(t, std::move(v));
  }
  return h;
}

Slice eval_xi(const HamiltonianModel& model, std::span<const Slice> dw, const Slice& mu) {
  return project_mean_zero(eval_hamiltonian(model, dw, mu));
}

Slice eval_upsilon(const HamiltonianModel& model, std::span<const Slice> dw, const Slice& mu) {
  check_inputs(model, dw, mu);
  const ModeLattice& lat = mu.lattice();
  const double mbar = model.mbar();
  Slice out(lat);
  PowerCache m(density(mu, mbar));
  PowerCache fluctuation(mu);
  MomentumTerms p(dw);
  for (const auto& t : model.terms()) {
    if (t.momentum.kind != MomentumFactor::Kind::none) {
      Slice v = p.value(t.momentum);
      if (t.density_power > 0) v = product(m(t.density_power), v);
      out += with_coefficient(t, std::move(v));
      continue;
    }
    // (mu + mbar)^s minus its mu-linear part: mbar^s + sum_{r >= 2} C(s, r) mbar^(s-r) mu^r
    const int s = t.density_power;
    Slice v = constant_slice(lat, std::pow(mbar, s));
    for (int r = 2; r <= s; ++r) v += (binomial(s, r) * std::pow(mbar, s - r)) * fluctuation(r);
    out += with_coefficient(t, std::move(v));
  }
  return project_mean_zero(out);
}

// ---------------------------------------------------------------------------

namespace {

template <typename Fn>
Field slicewise(const VectorField& dw, const Field& mu, Fn&& fn) {
  if (!dw.grid().samples() || !(dw.lattice() == mu.lattice()) || !(dw.grid() == mu.grid()))
    throw std::invalid_argument("Hamiltonian evaluation: grid or lattice mismatch");
  Field out(mu.grid(), mu.lattice());
  std::vector<Slice> p;
  for (Index i = 0; i < mu.samples(); ++i) {
    p.clear();
    for (const auto& c : dw) p.push_back(c.slice(i));
    out.set_slice(i, fn(std::span<const Slice>(p), mu.slice(i)));
  }
  return out;
}

}  // namespace

VectorField eval_theta(const HamiltonianModel& model, const VectorField& dw, const Field& mu) {
  if (!(dw.lattice() == mu.lattice()) || !(dw.grid() == mu.grid()))
    throw std::invalid_argument("eval_theta: grid or lattice mismatch");
  auto out = VectorField::zero(mu.grid(), mu.lattice());
  if (model.is_zero()) return out;
  std::vector<Slice> p;
  for (Index i = 0; i < mu.samples(); ++i) {
    p.clear();
    for (const auto& c : dw) p.push_back(c.slice(i));
    const auto theta = eval_theta(model, std::span<const Slice>(p), mu.slice(i));
    for (int d = 0; d < model.dim(); ++d) out[d].set_slice(i, theta[d]);
  }
  return out;
}

Field eval_hamiltonian(const HamiltonianModel& model, const VectorField& dw, const Field& mu) {
  return slicewise(dw, mu, [&](std::span<const Slice> p, const Slice& m) { return eval_hamiltonian(model, p, m); });
}

Field eval_xi(const HamiltonianModel& model, const VectorField& dw, const Field& mu) {
  return project_mean_zero(eval_hamiltonian(model, dw, mu));
}

LinearSplit eval_upsilon_b(const HamiltonianModel& model, const VectorField& dw, const Field& mu) {
  Field b = Field::constant_in_time(mu.grid(), model.linear_coefficient(mu.lattice()));
  Field upsilon =
      slicewise(dw, mu, [&](std::span<const Slice> p, const Slice& m) { return eval_upsilon(model, p, m); });
  return {std::move(b), std::move(upsilon)};
}

// ---------------------------------------------------------------------------

PayoffOperator PayoffOperator::from_name(const std::string& name) {
  if (name == "zero") return PayoffOperator(Kind::zero);
  if (name == "identity") return PayoffOperator(Kind::identity);
  if (name == "square") return PayoffOperator(Kind::square);
  throw std::invalid_argument("unknown payoff operator '" + name + "' (expected zero, identity or square)");
}

std::string PayoffOperator::name() const {
  switch (kind_) {
    case Kind::zero: return "zero";
    case Kind::identity: return "identity";
    case Kind::square: return "square";
  }
  return "unknown";
}

Slice PayoffOperator::apply(const Slice& mu_terminal) const {
  const double mbar = uniform_density(mu_terminal.dim());
  switch (kind_) {
    case Kind::zero:
      return Slice(mu_terminal.lattice());
    case Kind::identity:
      return project_mean_zero(mu_terminal);
    case Kind::square: {
      const Slice m = density(mu_terminal, mbar);
      return project_mean_zero(product(m, m));
    }
  }
  return Slice(mu_terminal.lattice());
}

double PayoffOperator::terminal_mean(const Slice& mu_terminal) const {
  const double mbar = uniform_density(mu_terminal.dim());
  const Slice m = density(mu_terminal, mbar);
  switch (kind_) {
    case Kind::zero:
      return 0.0;
    case Kind::identity:
      return m.coeffs()(m.lattice().zero_index()).real();
    case Kind::square:
      return product(m, m).coeffs()(m.lattice().zero_index()).real();
  }
  return 0.0;
}

Slice eval_payoff(const PayoffOperator& payoff, const Slice& mu_terminal) { return payoff.apply(mu_terminal); }

// ---------------------------------------------------------------------------

LipschitzEstimate lipschitz_probe(const HamiltonianModel& model, const Grid& grid, const ModeLattice& lattice,
                                  double radius, int trials, std::uint64_t seed) {
  if (!(radius > 0.0)) throw std::invalid_argument("lipschitz_probe: radius must be > 0");
  if (trials < 1) throw std::invalid_argument("lipschitz_probe: trials must be >= 1");
  LipschitzEstimate est;
  if (model.is_zero()) return est;

  std::mt19937_64 rng(seed);
  auto unit = [&](double decay) {
    Field f = random_mean_zero_field(grid, lattice, rng, decay);
    return (1.0 / space_time_norm(f, 2)) * f;
  };
  constexpr double floor_radius = 1e-4;
  for (int t = 0; t < trials; ++t) {
    const Field w1 = unit(1.0), w2 = unit(1.0), mu1 = unit(1.0), mu2 = unit(1.0);
    for (double r = radius; r >= floor_radius; r *= 0.5) {
      // points with ||w|| + ||mu|| <= r in B_alpha^2
      const Field a_w = (0.5 * r) * w1, b_w = (0.25 * r) * w2;
      const Field a_mu = (0.5 * r) * mu1, b_mu = (0.25 * r) * mu2;
      const VectorField da = gradient(a_w), db = gradient(b_w);
      const double denom = space_time_norm(da - db, 1) + space_time_norm(a_mu - b_mu, 2);
      if (!(denom > 0.0)) continue;
      const VectorField ta = eval_theta(model, da, a_mu), tb = eval_theta(model, db, b_mu);
      est.theta_ratio = std::max(est.theta_ratio, space_time_norm(ta - tb, 1) / denom);
      const Field ua = eval_upsilon_b(model, da, a_mu).upsilon, ub = eval_upsilon_b(model, db, b_mu).upsilon;
      est.upsilon_ratio = std::max(est.upsilon_ratio, space_time_norm(ua - ub, 0) / denom);
    }
  }
  return est;
}

}  // namespace mfg
