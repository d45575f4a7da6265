#include "mfg/continuation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mfg/heat.hpp"

namespace mfg {

namespace {

void require_planning(const ProblemData& data) {
  if (data.kind != ProblemKind::planning)
    throw std::invalid_argument("weak-coupling formulation requires planning boundary data");
}

Field transport(const Field& w, const Field& mu, const ProblemData& data) {
  const VectorField theta = eval_theta(data.model, gradient(w), mu);
  Field m = mu;
  m.add_constant(data.mbar());
  std::vector<Field> flux;
  for (const auto& c : theta) flux.push_back(product(c, m));
  return integrate_forward(divergence(VectorField(std::move(flux))));
}

Field running_cost(const Field& w, const Field& mu, const ProblemData& data) {
  return integrate_backward(eval_xi(data.model, gradient(w), mu));
}

}  // namespace

FieldPair heat_flow(const ProblemData& data) {
  require_planning(data);
  return {heat_backward(data.terminal_w, data.grid), heat_forward(data.mu0, data.grid)};
}

FieldPair apply_F(const Field& w, const Field& mu, double eps, const ProblemData& data) {
  FieldPair base = heat_flow(data);
  Field fw = w - base.w;
  Field fmu = mu - base.mu;
  if (eps != 0.0 && !data.model.is_zero()) {
    fw -= eps * running_cost(w, mu, data);
    fmu += eps * transport(w, mu, data);
  }
  return {std::move(fw), std::move(fmu)};
}

SolveResult solve_at_epsilon(double eps, const ProblemData& data, const std::optional<FieldPair>& warm_start,
                             double tol, int max_iter) {
  const FieldPair base = heat_flow(data);
  FieldPair x = warm_start ? *warm_start : base;
  PicardOptions options;
  options.tol = tol;
  options.max_iter = max_iter;
  auto step = [&](const FieldPair& p) -> FieldPair {
    if (eps == 0.0 || data.model.is_zero()) return base;
    return {base.w + eps * running_cost(p.w, p.mu, data), base.mu - eps * transport(p.w, p.mu, data)};
  };
  SolveReport report = iterate_to_fixed_point(x, base, options, step);
  if (report.converged) {
    report.final_residual = pair_norm(apply_F(x.w, x.mu, eps, data));
    return {reconstruct(std::move(x.w), std::move(x.mu), data, eps), std::move(report)};
  }
  Solution sol{std::move(x.w), std::move(x.mu), std::vector<double>(data.grid.samples(), 0.0), data.mbar()};
  return {std::move(sol), std::move(report)};
}

std::optional<double> EpsilonBranch::epsilon0_estimate() const {
  std::optional<double> out;
  for (const auto& f : {lower_failure, upper_failure})
    if (f) out = out ? std::min(*out, std::abs(f->eps)) : std::abs(f->eps);
  return out;
}

EpsilonBranch continuation_sweep(const ProblemData& data, double eps_max, int steps, double tol, int max_iter) {
  if (steps < 1) throw std::invalid_argument("continuation_sweep: steps must be >= 1");
  if (!(eps_max > 0.0)) throw std::invalid_argument("continuation_sweep: eps_max must be > 0");
  const double h = eps_max / steps;

  auto solve = [&](double eps, const std::optional<FieldPair>& warm) {
    SolveResult r = solve_at_epsilon(eps, data, warm, tol, max_iter);
    BranchPoint pt;
    pt.eps = eps;
    pt.converged = r.report.converged;
    pt.iterations = r.report.iterations;
    pt.residual = r.report.final_residual;
    pt.contraction = contraction_ratio(r.report);
    return std::make_pair(pt, std::move(r));
  };

  auto [origin, origin_result] = solve(0.0, std::nullopt);
  const FieldPair origin_pair{origin_result.solution.w, origin_result.solution.mu};

  std::vector<std::pair<BranchPoint, Solution>> below, above;
  EpsilonBranch branch;
  for (int sign : {-1, 1}) {
    auto& side = sign < 0 ? below : above;
    FieldPair warm = origin_pair;
    for (int j = 1; j <= steps; ++j) {
      auto [pt, result] = solve(sign * j * h, warm);
      if (!pt.converged) {
        (sign < 0 ? branch.lower_failure : branch.upper_failure) = pt;
        break;
      }
      warm = {result.solution.w, result.solution.mu};
      pt.distance_from_heat = pair_distance(warm, origin_pair);
      side.emplace_back(pt, std::move(result.solution));
    }
  }

  std::reverse(below.begin(), below.end());
  for (auto& [pt, sol] : below) { branch.points.push_back(pt); branch.solutions.push_back(std::move(sol)); }
  branch.points.push_back(origin);
  branch.solutions.push_back(std::move(origin_result.solution));
  for (auto& [pt, sol] : above) { branch.points.push_back(pt); branch.solutions.push_back(std::move(sol)); }

  double sxy = 0.0, sxx = 0.0;
  for (const auto& pt : branch.points) {
    if (pt.eps == 0.0) continue;
    const double a = std::abs(pt.eps);
    sxy += a * pt.distance_from_heat;
    sxx += a * a;
    branch.max_ratio = std::max(branch.max_ratio, pt.distance_from_heat / a);
  }
  branch.slope_fit = sxx > 0.0 ? sxy / sxx : 0.0;
  return branch;
}

}  // namespace mfg
