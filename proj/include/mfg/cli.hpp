#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mfg/continuation.hpp"
#include "mfg/fixed_point.hpp"
#include "mfg/verification.hpp"

namespace mfg::cli {

inline constexpr const char* version = "0.1.0";

enum ExitCode : int { ok = 0, usage_error = 1, not_converged = 2, verification_failed = 3 };

/// Bad config, archive or command line; maps to exit code 1.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SolverSettings {
  double tol = 1e-9;
  int max_iter = 200;
  std::optional<double> epsilon;  // weak-coupling solve when set
};

struct ContinuationSettings {
  double eps_max = 0.0;
  int steps = 0;
};

struct SweepSettings {
  std::string parameter;  // delta | wT_amplitude | epsilon
  std::vector<double> values;
};

struct VerifyThresholds {
  double hjb = 1e-4;
  double fp = 1e-4;
  double boundary = 1e-8;
  double mass = 1e-12;
  std::optional<double> positivity = 0.0;  // m must exceed this; null in the config disables the check
  bool decay = true;        // analyticity check on (0, T/2]
};

/// Parsed and validated run configuration. `source` keeps the document as read.
struct RunConfig {
  nlohmann::json source;
  ProblemData problem;
  SolverSettings solver;
  std::optional<ContinuationSettings> continuation;
  std::optional<SweepSettings> sweep;
  VerifyThresholds verify;
  std::optional<std::string> output_directory;
};

/// Validates every field before anything is computed; throws InputError naming the violated bound.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);

/// Config with one sweep parameter replaced.
nlohmann::json with_parameter(nlohmann::json doc, const std::string& parameter, double value);

struct Archive {
  nlohmann::json metadata;  // config echo, version, timestamp
  Solution solution;
  nlohmann::json report;
};

nlohmann::json report_to_json(const SolveReport& report, std::optional<double> epsilon);
nlohmann::json residuals_to_json(const ResidualReport& rep);

void write_field_table(const std::filesystem::path& path, const Field& f);
Field read_field_table(const std::filesystem::path& path, const Grid& grid, const ModeLattice& lat);

void write_archive(const std::filesystem::path& dir, const RunConfig& cfg, const Solution& sol,
                   const nlohmann::json& report);
/// Reads an archive and rebuilds the problem from its config echo.
std::pair<RunConfig, Archive> read_archive(const std::filesystem::path& dir);

/// Entry point shared by the executable and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mfg::cli
