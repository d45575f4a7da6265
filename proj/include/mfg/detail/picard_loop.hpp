#pragma once

#include <cmath>
#include <sstream>

namespace mfg {

template <typename Step>
SolveReport iterate_to_fixed_point(FieldPair& x, const FieldPair& center, const PicardOptions& options, Step&& step) {
  if (!(options.tol > 0.0)) throw std::invalid_argument("Picard iteration: tol must be > 0");
  SolveReport report;
  report.center_norm = pair_norm(center);
  report.orbit_radius = pair_distance(x, center);
  for (int it = 1; it <= options.max_iter; ++it) {
    FieldPair next = step(x);
    const double d = pair_distance(next, x);
    report.iterations = it;
    if (!report.update_norms.empty()) {
      const double prev = report.update_norms.back();
      report.ratios.push_back(!std::isfinite(d) ? INFINITY : (prev > 0.0 ? d / prev : 0.0));
    }
    report.update_norms.push_back(d);
    if (!std::isfinite(d) || d > options.blowup) {
      report.message = "update norm diverged at iteration " + std::to_string(it);
      return report;
    }
    x = std::move(next);
    report.orbit_radius = std::max(report.orbit_radius, pair_distance(x, center));
    if (d < options.tol) {
      report.final_residual = pair_distance(step(x), x);
      report.converged = true;
      std::ostringstream msg;
      msg << "converged in " << it << " iterations";
      report.message = msg.str();
      return report;
    }
  }
  report.message = "no convergence within " + std::to_string(options.max_iter) + " iterations";
  return report;
}

}  // namespace mfg
