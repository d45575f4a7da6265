#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "mfg/cli.hpp"

namespace mfg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string full(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("archive: missing " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError("archive: " + path.filename().string() + " is not valid JSON: " + e.what());
  }
}

double parse_double(const std::string& tok, const fs::path& path, int line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != tok.size())
    throw InputError("archive: " + path.filename().string() + " line " + std::to_string(line) + ": bad number '" + tok + "'");
  return v;
}

}  // namespace

json report_to_json(const SolveReport& report, std::optional<double> epsilon) {
  json out{{"iterations", report.iterations},
           {"converged", report.converged},
           {"message", report.message},
           {"update_norms", report.update_norms},
           {"ratios", report.ratios},
           {"contraction_ratio", contraction_ratio(report)},
           {"final_residual", report.final_residual},
           {"center_norm", report.center_norm},
           {"orbit_radius", report.orbit_radius}};
  out["epsilon"] = epsilon ? json(*epsilon) : json(nullptr);
  // JSON has no infinity; diverged ratios are written as null
  for (auto& r : out["ratios"])
    if (!std::isfinite(r.get<double>())) r = nullptr;
  for (auto& r : out["update_norms"])
    if (!std::isfinite(r.get<double>())) r = nullptr;
  if (!std::isfinite(out["contraction_ratio"].get<double>())) out["contraction_ratio"] = nullptr;
  return out;
}

json residuals_to_json(const ResidualReport& rep) {
  json decay = json::array();
  for (const auto& d : rep.audit.decay)
    decay.push_back({{"t", d.time}, {"beta", d.beta}, {"mu_slope", d.slope}, {"w_slope", d.w_slope},
                     {"degenerate", d.degenerate}, {"pass", d.pass}});
  return {{"hjb_residual", rep.hjb_residual},         {"fp_residual", rep.fp_residual},
          {"initial_error", rep.initial_error},       {"terminal_error", rep.terminal_error},
          {"terminal_mean_error", rep.terminal_mean_error}, {"mass_deviation", rep.audit.mass_deviation},
          {"positivity_min", rep.audit.positivity_min}, {"decay", decay}};
}

void write_field_table(const fs::path& path, const Field& f) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  const ModeLattice& lat = f.lattice();
  out << "time_index";
  for (int d = 0; d < lat.dim(); ++d) out << "\tk_" << d + 1;
  out << "\treal\timag\n";
  for (Index i = 0; i < f.samples(); ++i) {
    for (Index k = 0; k < lat.size(); ++k) {
      out << i;
      for (int d = 0; d < lat.dim(); ++d) out << '\t' << lat.component(k, d);
      const auto c = f.coeffs()(i, k);
      out << '\t' << full(c.real()) << '\t' << full(c.imag()) << '\n';
    }
  }
}

Field read_field_table(const fs::path& path, const Grid& grid, const ModeLattice& lat) {
  std::ifstream in(path);
  if (!in) throw InputError("archive: missing " + path.string());
  Field f(grid, lat);
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> seen =
      Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(grid.samples(), lat.size(), false);
  std::string line;
  if (!std::getline(in, line) || line.rfind("time_index", 0) != 0)
    throw InputError("archive: " + path.filename().string() + " has no header");
  const std::size_t columns = 3 + lat.dim();
  int lineno = 1;
  std::vector<int> k(lat.dim());
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> tok;
    std::istringstream ss(line);
    for (std::string t; std::getline(ss, t, '\t');) tok.push_back(t);
    if (tok.size() != columns)
      throw InputError("archive: " + path.filename().string() + " line " + std::to_string(lineno) +
                       ": expected " + std::to_string(columns) + " columns");
    const double ti = parse_double(tok[0], path, lineno);
    for (int d = 0; d < lat.dim(); ++d) k[d] = int(parse_double(tok[1 + d], path, lineno));
    if (ti < 0 || ti >= double(grid.samples()) || ti != std::floor(ti) || !lat.contains(k))
      throw InputError("archive: " + path.filename().string() + " line " + std::to_string(lineno) +
                       ": index out of range");
    const Index i = Index(ti), idx = lat.index(k);
    f.coeffs()(i, idx) = {parse_double(tok[columns - 2], path, lineno), parse_double(tok[columns - 1], path, lineno)};
    seen(i, idx) = true;
  }
  if (!seen.all()) throw InputError("archive: " + path.filename().string() + " is truncated (missing coefficients)");
  return f;
}

void write_archive(const fs::path& dir, const RunConfig& cfg, const Solution& sol, const json& report) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory " + dir.string() + ": " + ec.message());
  write_json(dir / "metadata.json", {{"config", cfg.source}, {"version", version}, {"timestamp", timestamp()}});
  write_field_table(dir / "w.tsv", sol.w);
  write_field_table(dir / "mu.tsv", sol.mu);
  std::ofstream mean(dir / "u_mean.tsv");
  mean << "time_index\tt\tu_mean\n";
  for (std::size_t i = 0; i < sol.u_mean.size(); ++i)
    mean << i << '\t' << full(sol.w.grid().time(Index(i))) << '\t' << full(sol.u_mean[i]) << '\n';
  write_json(dir / "report.json", report);
}

std::pair<RunConfig, Archive> read_archive(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InputError("archive: " + dir.string() + " is not a directory");
  json meta = read_json(dir / "metadata.json");
  if (!meta.contains("config")) throw InputError("archive: metadata.json has no config echo");
  RunConfig cfg = [&] {
    try {
      return parse_config(meta.at("config"));
    } catch (const InputError&) {
      throw;
    } catch (const std::exception& e) {
      throw InputError(std::string("archive config: ") + e.what());
    }
  }();
  const Grid& grid = cfg.problem.grid;
  const ModeLattice& lat = cfg.problem.lattice;
  Field w = read_field_table(dir / "w.tsv", grid, lat);
  Field mu = read_field_table(dir / "mu.tsv", grid, lat);

  std::ifstream in(dir / "u_mean.tsv");
  if (!in) throw InputError("archive: missing u_mean.tsv");
  std::vector<double> mean(grid.samples(), 0.0);
  std::vector<bool> seen(grid.samples(), false);
  std::string line;
  std::getline(in, line);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string a, b, c;
    if (!std::getline(ss, a, '\t') || !std::getline(ss, b, '\t') || !std::getline(ss, c))
      throw InputError("archive: u_mean.tsv line " + std::to_string(lineno) + ": expected 3 columns");
    const double i = parse_double(a, dir / "u_mean.tsv", lineno);
    if (i < 0 || i >= double(grid.samples())) throw InputError("archive: u_mean.tsv index out of range");
    mean[std::size_t(i)] = parse_double(c, dir / "u_mean.tsv", lineno);
    seen[std::size_t(i)] = true;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) throw InputError("archive: u_mean.tsv is truncated");

  json report = read_json(dir / "report.json");
  Archive ar{std::move(meta), Solution{std::move(w), std::move(mu), std::move(mean), cfg.problem.mbar()},
             std::move(report)};
  return {std::move(cfg), std::move(ar)};
}

}  // namespace mfg::cli
