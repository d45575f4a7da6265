#include <algorithm>
#include <charconv>
#include <atomic>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "mfg/cli.hpp"

namespace mfg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path output_dir(const std::string& flag, const std::optional<std::string>& configured) {
  if (!flag.empty()) return flag;
  if (configured) return *configured;
  if (const char* env = std::getenv("MFG_OUTPUT_DIR"); env && *env) return env;
  return "mfg_out";
}

SolveResult run_solver(const RunConfig& cfg, const std::optional<FieldPair>& warm = {}) {
  if (cfg.solver.epsilon) return solve_at_epsilon(*cfg.solver.epsilon, cfg.problem, warm, cfg.solver.tol, cfg.solver.max_iter);
  PicardOptions opt;
  opt.tol = cfg.solver.tol;
  opt.max_iter = cfg.solver.max_iter;
  return picard_solve(cfg.problem, opt);
}

std::string fmt(double x, int prec = 6) {
  std::ostringstream s;
  s << std::setprecision(prec) << x;
  return s.str();
}

/// Shortest text that reads back to the same double.
std::string exact(double x) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return ec == std::errc() ? std::string(buf, end) : fmt(x, 17);
}

void write_table(const fs::path& path, const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "\t" : "") << header[c];
  out << '\n';
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) out << (c ? "\t" : "") << r[c];
    out << '\n';
  }
}

void print_table(std::ostream& os, const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size() && c < width.size(); ++c) width[c] = std::max(width[c], r[c].size());
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t c = 0; c < r.size(); ++c) os << (c ? "  " : "") << std::left << std::setw(int(width[c])) << r[c];
    os << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
}

// ---------------------------------------------------------------------------

int cmd_solve(const std::string& config, const std::string& out_flag, std::ostream& out) {
  const RunConfig cfg = load_config(config);
  const fs::path dir = output_dir(out_flag, cfg.output_directory);
  SolveResult res = run_solver(cfg);
  json report = report_to_json(res.report, cfg.solver.epsilon);
  if (res.report.converged)
    report["residuals"] = residuals_to_json(residual_pde(res.solution, cfg.problem, cfg.solver.epsilon.value_or(1.0)));
  write_archive(dir, cfg, res.solution, report);
  out << (res.report.converged ? "converged" : "NOT converged") << ": " << res.report.message
      << ", contraction ratio " << fmt(contraction_ratio(res.report)) << "\n"
      << "archive written to " << dir.string() << "\n";
  return res.report.converged ? ok : not_converged;
}

int cmd_verify(const std::string& archive, const std::string& out_flag, std::ostream& out, std::ostream& err) {
  auto [cfg, ar] = read_archive(archive);
  const ResidualReport rep = residual_pde(ar.solution, cfg.problem, cfg.solver.epsilon.value_or(1.0));
  const VerifyThresholds& t = cfg.verify;
  std::vector<std::string> failures;
  auto check = [&](const char* name, double value, double limit) {
    if (!(value <= limit)) failures.push_back(std::string(name) + " = " + fmt(value) + " exceeds " + fmt(limit));
  };
  check("hjb_residual", rep.hjb_residual, t.hjb);
  check("fp_residual", rep.fp_residual, t.fp);
  check("initial_error", rep.initial_error, t.boundary);
  check("terminal_error", rep.terminal_error, t.boundary);
  check("terminal_mean_error", rep.terminal_mean_error, t.boundary);
  check("mass_deviation", rep.audit.mass_deviation, t.mass);
  if (t.positivity && !(rep.audit.positivity_min > *t.positivity))
    failures.push_back("positivity_min = " + fmt(rep.audit.positivity_min) + " is not above " + fmt(*t.positivity));
  const Grid& grid = cfg.problem.grid;
  if (t.decay && !rep.audit.decay_pass(0.5 * grid.step(), 0.5 * grid.horizon()))
    failures.push_back("decay slope above -beta(t) + " + fmt(decay_slope_tolerance) + " on (0, T/2]");

  json doc = residuals_to_json(rep);
  doc["failures"] = failures;
  doc["pass"] = failures.empty();
  const fs::path dir = out_flag.empty() ? fs::path(archive) : fs::path(out_flag);
  fs::create_directories(dir);
  std::ofstream(dir / "verify.json") << doc.dump(2) << '\n';

  out << "hjb residual " << fmt(rep.hjb_residual) << ", fp residual " << fmt(rep.fp_residual) << ", mass deviation "
      << fmt(rep.audit.mass_deviation) << ", min m " << fmt(rep.audit.positivity_min) << "\n";
  if (failures.empty()) {
    out << "verification passed\n";
    return ok;
  }
  err << "verification failed:\n";
  for (const auto& f : failures) err << "  " << f << "\n";
  return verification_failed;
}

struct SweepRow {
  double value = 0.0;
  std::optional<SolveResult> result;
  std::optional<ResidualReport> residuals;
  std::string error;
};

int cmd_sweep(const std::string& config, const std::string& out_flag, int threads, std::ostream& out) {
  const RunConfig cfg = load_config(config);
  if (!cfg.sweep) throw InputError("config has no sweep section");
  if (cfg.sweep->values.empty()) throw InputError("sweep.values is empty");
  const fs::path dir = output_dir(out_flag, cfg.output_directory);
  const SweepSettings& sw = *cfg.sweep;

  std::vector<SweepRow> rows(sw.values.size());
  auto solve_row = [&](std::size_t r, const std::optional<FieldPair>& warm) {
    SweepRow& row = rows[r];
    row.value = sw.values[r];
    try {
      const RunConfig rc = parse_config(with_parameter(cfg.source, sw.parameter, row.value));
      row.result = run_solver(rc, warm);
      if (row.result->report.converged)
        row.residuals = residual_pde(row.result->solution, rc.problem, rc.solver.epsilon.value_or(1.0));
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  };

  if (sw.parameter == "epsilon") {
    // warm starts chain the rows, so they run in order
    std::optional<FieldPair> warm;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      solve_row(r, warm);
      if (rows[r].result && rows[r].result->report.converged)
        warm = FieldPair{rows[r].result->solution.w, rows[r].result->solution.mu};
    }
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t r; (r = next++) < rows.size();) solve_row(r, std::nullopt);
    };
    const int n = std::max(1, std::min<int>(threads, int(rows.size())));
    std::vector<std::thread> pool;
    for (int i = 1; i < n; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
  }

  const std::vector<std::string> header{sw.parameter, "converged", "iterations", "contraction_ratio",
                                        "final_residual", "hjb_residual", "fp_residual", "message"};
  std::vector<std::vector<std::string>> table;
  for (const auto& row : rows) {
    if (!row.result) {
      table.push_back({exact(row.value), "error", "", "", "", "", "", row.error});
      continue;
    }
    const SolveReport& rep = row.result->report;
    table.push_back({exact(row.value), rep.converged ? "yes" : "no", std::to_string(rep.iterations),
                     exact(contraction_ratio(rep)), rep.converged ? exact(rep.final_residual) : "",
                     row.residuals ? exact(row.residuals->hjb_residual) : "", row.residuals ? exact(row.residuals->fp_residual) : "",
                     rep.message});
  }
  fs::create_directories(dir);
  write_table(dir / "sweep.tsv", header, table);
  print_table(out, header, table);

  if (sw.parameter == "epsilon" && cfg.continuation) {
    const EpsilonBranch branch = continuation_sweep(cfg.problem, cfg.continuation->eps_max, cfg.continuation->steps,
                                                    cfg.solver.tol, cfg.solver.max_iter);
    std::vector<std::vector<std::string>> brows;
    for (const auto& p : branch.points)
      brows.push_back({exact(p.eps), std::to_string(p.iterations), exact(p.residual),
                       exact(p.distance_from_heat), exact(p.contraction)});
    write_table(dir / "branch.tsv", {"epsilon", "iterations", "residual", "distance_from_heat", "contraction_ratio"},
                brows);
    auto failure = [](const std::optional<BranchPoint>& f) { return f ? json(f->eps) : json(nullptr); };
    json summary{{"lower_failure", failure(branch.lower_failure)},
                 {"upper_failure", failure(branch.upper_failure)},
                 {"slope_fit", branch.slope_fit},
                 {"max_ratio", branch.max_ratio}};
    const auto e0 = branch.epsilon0_estimate();
    summary["epsilon0_estimate"] = e0 ? json(*e0) : json(nullptr);
    std::ofstream(dir / "branch.json") << summary.dump(2) << '\n';
    out << "branch: " << branch.points.size() << " converged points, fitted C " << fmt(branch.slope_fit)
        << (e0 ? ", first failure at |eps| = " + fmt(*e0) : ", no failure up to eps_max") << "\n";
  }
  out << "sweep written to " << (dir / "sweep.tsv").string() << "\n";
  return ok;
}

int cmd_export(const std::string& archive, const std::string& what, int points, const std::string& out_flag,
               std::ostream& out) {
  static const std::vector<std::string> known{"u", "m", "w", "mu", "u_mean", "decay", "norms"};
  if (std::find(known.begin(), known.end(), what) == known.end())
    throw InputError("unknown export field '" + what + "' (expected u, m, w, mu, u_mean, decay or norms)");
  if (points < 1) throw InputError("--points must be >= 1");
  auto [cfg, ar] = read_archive(archive);
  const Solution& sol = ar.solution;
  const Grid& grid = cfg.problem.grid;
  const int n = cfg.problem.lattice.dim();
  std::vector<std::string> header{"time_index", "t"};
  std::vector<std::vector<std::string>> rows;

  if (what == "u_mean") {
    header.push_back("u_mean");
    for (Index i = 0; i < grid.samples(); ++i)
      rows.push_back({std::to_string(i), exact(grid.time(i)), exact(sol.u_mean[i])});
  } else if (what == "decay") {
    header.insert(header.end(), {"beta", "mu_slope", "w_slope", "degenerate", "pass"});
    const AuditReport rep = audit(sol, cfg.problem);
    for (std::size_t i = 0; i < rep.decay.size(); ++i) {
      const auto& d = rep.decay[i];
      rows.push_back({std::to_string(i), exact(d.time), exact(d.beta), d.degenerate ? "" : exact(d.slope),
                      d.degenerate ? "" : exact(d.w_slope), d.degenerate ? "1" : "0", d.pass ? "1" : "0"});
    }
  } else if (what == "norms") {
    header.insert(header.end(), {"w_B0", "w_B2", "mu_B0", "mu_B2"});
    for (Index i = 0; i < grid.samples(); ++i) {
      const Slice w = sol.w.slice(i), mu = sol.mu.slice(i);
      rows.push_back({std::to_string(i), exact(grid.time(i)), exact(wiener_norm(w, 0)), exact(wiener_norm(w, 2)),
                      exact(wiener_norm(mu, 0)), exact(wiener_norm(mu, 2))});
    }
  } else {
    for (int d = 0; d < n; ++d) header.push_back("x_" + std::to_string(d + 1));
    header.push_back(what);
    const Field f = what == "u" ? sol.u() : what == "m" ? sol.m() : what == "w" ? sol.w : sol.mu;
    Index total = 1;
    for (int d = 0; d < n; ++d) total *= points;
    for (Index i = 0; i < grid.samples(); ++i) {
      const auto values = sample_physical(f.slice(i), points);
      for (Index p = 0; p < total; ++p) {
        std::vector<std::string> r{std::to_string(i), exact(grid.time(i))};
        Index rest = p;
        for (int d = 0; d < n; ++d) {
          r.push_back(exact(2.0 * std::numbers::pi * double(rest % points) / points));
          rest /= points;
        }
        r.push_back(exact(values(p)));
        rows.push_back(std::move(r));
      }
    }
  }
  const fs::path dir = out_flag.empty() ? fs::path(archive) : fs::path(out_flag);
  fs::create_directories(dir);
  write_table(dir / (what + ".tsv"), header, rows);
  out << rows.size() << " rows written to " << (dir / (what + ".tsv")).string() << "\n";
  return ok;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spectral fixed-point solver for time-dependent mean field games on the torus", "mfg"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version);
  std::string format = "table";
  int threads = 1;
  app.add_option("--format", format, "Output format for tables")->check(CLI::IsMember({"table"}));
  app.add_option("--threads", threads, "Worker threads for sweep rows")->check(CLI::PositiveNumber);

  std::string config, archive, out_dir, what;
  int points = 32;
  auto* solve = app.add_subcommand("solve", "Solve one problem and write an archive");
  solve->add_option("--config", config, "Run configuration (JSON)")->required();
  solve->add_option("--out", out_dir, "Archive directory (default: output.directory, $MFG_OUTPUT_DIR, mfg_out)");

  auto* verify = app.add_subcommand("verify", "Check PDE residuals, boundary data, mass, positivity and decay");
  verify->add_option("--archive", archive, "Archive directory")->required();
  verify->add_option("--out", out_dir, "Where to write verify.json (default: the archive)");

  auto* sweep = app.add_subcommand("sweep", "Solve over a parameter list and tabulate");
  sweep->add_option("--config", config, "Run configuration with a sweep section")->required();
  sweep->add_option("--out", out_dir, "Output directory");

  auto* exp = app.add_subcommand("export", "Emit physical samples or diagnostics as delimited text");
  exp->add_option("--archive", archive, "Archive directory")->required();
  exp->add_option("--what", what, "u, m, w, mu, u_mean, decay or norms")->required();
  exp->add_option("--points", points, "Samples per dimension for physical fields");
  exp->add_option("--out", out_dir, "Output directory (default: the archive)");

  for (auto* sub : {solve, verify, sweep, exp}) {
    sub->add_option("--format", format, "Output format for tables")->check(CLI::IsMember({"table"}));
    sub->add_option("--threads", threads, "Worker threads for sweep rows")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ok;
  } catch (const CLI::CallForVersion&) {
    out << version << "\n";
    return ok;
  } catch (const CLI::ParseError& e) {
    err << "mfg: " << e.what() << "\n";
    return usage_error;
  }

  try {
    if (*solve) return cmd_solve(config, out_dir, out);
    if (*verify) return cmd_verify(archive, out_dir, out, err);
    if (*sweep) return cmd_sweep(config, out_dir, threads, out);
    return cmd_export(archive, what, points, out_dir, out);
  } catch (const InputError& e) {
    err << "mfg: " << e.what() << "\n";
    return usage_error;
  } catch (const std::exception& e) {
    err << "mfg: " << e.what() << "\n";
    return usage_error;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"mfg"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(int(argv.size()), argv.data(), out, err);
}

}  // namespace mfg::cli
