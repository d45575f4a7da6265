#include "mfg/fixed_point.hpp"

#include <stdexcept>

#include "mfg/heat.hpp"

namespace mfg {

bool ProblemData::density_nonnegative(int points) const {
  Slice m0 = mu0;
  m0.coeffs()(lattice.zero_index()) += mbar();
  return sample_physical(m0, points).minCoeff() >= 0.0;
}

namespace {

void check_data(const Grid&, const HamiltonianModel& model, const Slice& mu0) {
  if (model.dim() != mu0.dim()) throw std::invalid_argument("problem data: model and mu0 dimensions differ");
  if (!mu0.mean_zero()) throw std::invalid_argument("problem data: mu0 must be mean-zero");
  if (hermitian_defect(mu0) > 0.0) throw std::invalid_argument("problem data: mu0 is not a real function");
}

}  // namespace

ProblemData make_payoff_problem(Grid grid, HamiltonianModel model, Slice mu0, PayoffOperator payoff) {
  check_data(grid, model, mu0);
  const ModeLattice lat = mu0.lattice();
  return ProblemData{ProblemKind::payoff, std::move(grid), lat, std::move(model), std::move(mu0), Slice(lat), 0.0,
                     payoff};
}

ProblemData make_planning_problem(Grid grid, HamiltonianModel model, Slice mu0, Slice terminal_w,
                                  double terminal_u_mean) {
  check_data(grid, model, mu0);
  if (!(terminal_w.lattice() == mu0.lattice())) throw std::invalid_argument("problem data: wT lattice mismatch");
  if (!terminal_w.mean_zero()) throw std::invalid_argument("problem data: wT must be mean-zero");
  if (hermitian_defect(terminal_w) > 0.0) throw std::invalid_argument("problem data: wT is not a real function");
  const ModeLattice lat = mu0.lattice();
  return ProblemData{ProblemKind::planning, std::move(grid), lat,        std::move(model), std::move(mu0),
                     std::move(terminal_w), terminal_u_mean, PayoffOperator()};
}

double pair_norm(const FieldPair& p) { return space_time_norm(p.w, 2) + space_time_norm(p.mu, 2); }

double pair_distance(const FieldPair& a, const FieldPair& b) {
  return space_time_norm(a.w - b.w, 2) + space_time_norm(a.mu - b.mu, 2);
}

Field Solution::u() const {
  Field out = w;
  for (Index i = 0; i < out.samples(); ++i) out.coeffs()(i, out.lattice().zero_index()) += u_mean[i];
  return out;
}

Field Solution::m() const {
  Field out = mu;
  return out.add_constant(mbar);
}

FieldPair ball_center(const ProblemData& data) {
  const Field a0 = heat_forward(data.mu0, data.grid);
  const Slice b = data.model.linear_coefficient(data.lattice);
  const Field linear = integrate_backward(project_mean_zero(product(a0, b)));
  const Slice terminal = data.kind == ProblemKind::payoff ? data.payoff.apply(a0.slice(a0.samples() - 1))
                                                           : data.terminal_w;
  return {heat_backward(terminal, data.grid) + linear, a0};
}

namespace {

/// (mu + mbar) Theta, then its divergence.
Field transport_divergence(const VectorField& theta, const Field& mu, double mbar) {
  Field m = mu;
  m.add_constant(mbar);
  std::vector<Field> flux;
  for (const auto& c : theta) flux.push_back(product(c, m));
  return divergence(VectorField(std::move(flux)));
}

void check_pair(const Field& w, const Field& mu, const ProblemData& data) {
  if (!w.compatible(mu) || !(w.grid() == data.grid) || !(w.lattice() == data.lattice))
    throw std::invalid_argument("fixed-point map: operands do not match the problem grid and lattice");
}

Field density_update(const VectorField& theta, const Field& mu, const ProblemData& data) {
  Field out = heat_forward(data.mu0, data.grid);
  if (!data.model.is_zero()) out -= integrate_forward(transport_divergence(theta, mu, data.mbar()));
  return out;
}

Field value_update(const VectorField& dw, const Field& mu, const Field& t1, const ProblemData& data) {
  const Slice terminal =
      data.kind == ProblemKind::payoff ? data.payoff.apply(t1.slice(t1.samples() - 1)) : data.terminal_w;
  Field out = heat_backward(terminal, data.grid);
  if (data.model.is_zero()) return out;
  const LinearSplit split = eval_upsilon_b(data.model, dw, mu);
  const Slice b = data.model.linear_coefficient(data.lattice);
  out += integrate_backward(split.upsilon);
  out += integrate_backward(project_mean_zero(product(t1, b)));
  return out;
}

}  // namespace

Field apply_T1(const Field& w, const Field& mu, const ProblemData& data) {
  check_pair(w, mu, data);
  const VectorField dw = gradient(w);
  return density_update(eval_theta(data.model, dw, mu), mu, data);
}

Field apply_T2(const Field& w, const Field& mu, const ProblemData& data) {
  return apply_map({w, mu}, data).w;
}

FieldPair apply_map(const FieldPair& x, const ProblemData& data) {
  check_pair(x.w, x.mu, data);
  const VectorField dw = gradient(x.w);
  Field t1 = density_update(eval_theta(data.model, dw, x.mu), x.mu, data);
  Field t2 = value_update(dw, x.mu, t1, data);
  return {std::move(t2), std::move(t1)};
}

std::vector<double> recover_mean_u(const Field& w, const Field& mu, const ProblemData& data, double eps) {
  const Index n = data.grid.samples();
  std::vector<double> mean(n, 0.0);
  const Index last = n - 1;
  mean[last] = data.kind == ProblemKind::payoff ? data.payoff.terminal_mean(mu.slice(last)) : data.terminal_u_mean;
  if (data.model.is_zero() || eps == 0.0) {
    for (auto& v : mean) v = mean[last];
    return mean;
  }
  const Field h = eval_hamiltonian(data.model, gradient(w), mu);
  const Index zero = data.lattice.zero_index();
  const double dt = data.grid.step();
  for (Index i = last; i > 0; --i) {
    const double avg = 0.5 * (h.coeffs()(i, zero).real() + h.coeffs()(i - 1, zero).real());
    mean[i - 1] = mean[i] + eps * dt * avg;
  }
  return mean;
}

Solution reconstruct(Field w, Field mu, const ProblemData& data, double eps) {
  auto mean = recover_mean_u(w, mu, data, eps);
  return Solution{std::move(w), std::move(mu), std::move(mean), data.mbar()};
}

SolveResult picard_solve(const ProblemData& data, const PicardOptions& options) {
  const FieldPair center = ball_center(data);
  FieldPair x = options.start ? *options.start : center;
  SolveReport report =
      iterate_to_fixed_point(x, center, options, [&](const FieldPair& p) { return apply_map(p, data); });
  Solution sol = report.converged ? reconstruct(std::move(x.w), std::move(x.mu), data)
                                  : Solution{std::move(x.w), std::move(x.mu), std::vector<double>(data.grid.samples(), 0.0), data.mbar()};
  return {std::move(sol), std::move(report)};
}

double contraction_ratio(const SolveReport& report) {
  double worst = 0.0;
  for (double r : report.ratios) worst = std::max(worst, r);
  return worst;
}

}  // namespace mfg
