#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "mfg/cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mfg;

namespace {

json heat_config() {
  return json::parse(R"({
    "problem": {"kind": "planning", "T": 1.0, "alpha": 0.25, "n": 1, "K": 8, "N": 16},
    "hamiltonian": {"name": "zero"},
    "data": {"mu0": {"preset": "delta_cos", "amplitude": 0.05}, "wT": [{"k": [1], "re": 0.05}]},
    "solver": {"tol": 1e-12, "max_iter": 10},
    "verify": {"hjb": 1e-10, "fp": 1e-10, "boundary": 1e-12}
  })");
}

json quartic_config(double delta) {
  json c = json::parse(R"({
    "problem": {"kind": "payoff", "T": 1.0, "alpha": 0.25, "n": 1, "K": 8, "N": 16},
    "hamiltonian": {"name": "quartic_cubic"},
    "data": {"payoff": "identity"},
    "solver": {"tol": 1e-11, "max_iter": 100}
  })");
  c["data"]["mu0"] = {{"preset", "delta_cos"}, {"amplitude", delta}};
  return c;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("mfg_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const json& c, const std::string& name = "config.json") {
    const fs::path p = dir_ / name;
    std::ofstream(p) << c.dump(2);
    return p;
  }

  int run(const std::vector<std::string>& args) {
    out_.str("");
    err_.str("");
    return cli::run(args, out_, err_);
  }

  static std::vector<std::vector<std::string>> read_tsv(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::vector<std::string>> rows;
    for (std::string line; std::getline(in, line);) {
      std::vector<std::string> r;
      std::stringstream s(line);
      for (std::string cell; std::getline(s, cell, '\t');) r.push_back(cell);
      rows.push_back(r);
    }
    return rows;
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

}  // namespace

TEST_F(CliTest, SolveHeatFlowMatchesClosedForm) {
  const fs::path ar = dir_ / "ar";
  ASSERT_EQ(run({"solve", "--config", write_config(heat_config()).string(), "--out", ar.string()}), cli::ok) << err_.str();
  for (const char* f : {"metadata.json", "w.tsv", "mu.tsv", "u_mean.tsv", "report.json"}) EXPECT_TRUE(fs::exists(ar / f)) << f;

  ASSERT_EQ(run({"export", "--archive", ar.string(), "--what", "m", "--points", "8"}), cli::ok) << err_.str();
  const auto rows = read_tsv(ar / "m.tsv");
  ASSERT_EQ(rows.size(), 1u + 17u * 8u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"time_index", "t", "x_1", "m"}));
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const double t = std::stod(rows[r][1]), x = std::stod(rows[r][2]), m = std::stod(rows[r][3]);
    EXPECT_NEAR(m, 0.5 / std::numbers::pi + 0.05 * std::exp(-t) * std::cos(x), 1e-10);
  }
}

TEST_F(CliTest, ExportUMeanDecayAndNorms) {
  const fs::path ar = dir_ / "ar";
  ASSERT_EQ(run({"solve", "--config", write_config(quartic_config(0.01)).string(), "--out", ar.string()}), cli::ok);
  ASSERT_EQ(run({"export", "--archive", ar.string(), "--what", "u_mean"}), cli::ok);
  EXPECT_EQ(read_tsv(ar / "u_mean.tsv").size(), 1u + 17u);
  ASSERT_EQ(run({"export", "--archive", ar.string(), "--what", "decay", "--out", (dir_ / "x").string()}), cli::ok);
  const auto decay = read_tsv(dir_ / "x" / "decay.tsv");
  ASSERT_EQ(decay.size(), 1u + 17u);
  EXPECT_EQ(decay[0].back(), "pass");
  EXPECT_EQ(decay[8].back(), "1");
  ASSERT_EQ(run({"export", "--archive", ar.string(), "--what", "norms"}), cli::ok);
  EXPECT_EQ(read_tsv(ar / "norms.tsv").size(), 1u + 17u);
  EXPECT_EQ(run({"export", "--archive", ar.string(), "--what", "pressure"}), cli::usage_error);
  EXPECT_NE(err_.str().find("pressure"), std::string::npos);
}

TEST_F(CliTest, AlphaAtHalfHorizonIsRejected) {
  json c = heat_config();
  c["problem"]["alpha"] = 0.5;
  const fs::path ar = dir_ / "ar";
  EXPECT_EQ(run({"solve", "--config", write_config(c).string(), "--out", ar.string()}), cli::usage_error);
  EXPECT_NE(err_.str().find("alpha"), std::string::npos) << err_.str();
  EXPECT_FALSE(fs::exists(ar));
}

TEST_F(CliTest, VerifyGoodCorruptedAndTruncatedArchives) {
  const fs::path ar = dir_ / "ar";
  ASSERT_EQ(run({"solve", "--config", write_config(heat_config()).string(), "--out", ar.string()}), cli::ok);
  EXPECT_EQ(run({"verify", "--archive", ar.string()}), cli::ok) << err_.str();
  EXPECT_TRUE(json::parse(std::ifstream(ar / "verify.json"))["pass"].get<bool>());

  // perturb one mu coefficient of one interior sample
  auto rows = read_tsv(ar / "mu.tsv");
  const std::size_t col_re = rows[0].size() - 2;
  for (auto& r : rows)
    if (r[0] == "5" && r[1] == "1") r[col_re] = std::to_string(std::stod(r[col_re]) + 1e-3);
  {
    std::ofstream out(ar / "mu.tsv");
    for (const auto& r : rows) {
      for (std::size_t c = 0; c < r.size(); ++c) out << (c ? "\t" : "") << r[c];
      out << '\n';
    }
  }
  EXPECT_EQ(run({"verify", "--archive", ar.string()}), cli::verification_failed);
  EXPECT_NE(err_.str().find("fp_residual"), std::string::npos) << err_.str();
  EXPECT_FALSE(json::parse(std::ifstream(ar / "verify.json"))["pass"].get<bool>());

  rows.resize(rows.size() / 2);
  {
    std::ofstream out(ar / "mu.tsv");
    for (const auto& r : rows) {
      for (std::size_t c = 0; c < r.size(); ++c) out << (c ? "\t" : "") << r[c];
      out << '\n';
    }
  }
  EXPECT_EQ(run({"verify", "--archive", ar.string()}), cli::usage_error);
  EXPECT_EQ(run({"verify", "--archive", (dir_ / "missing").string()}), cli::usage_error);
}

TEST_F(CliTest, ArchiveRoundTripIsBitExact) {
  const fs::path ar = dir_ / "ar";
  ASSERT_EQ(run({"solve", "--config", write_config(quartic_config(0.05)).string(), "--out", ar.string()}), cli::ok);
  const cli::RunConfig cfg = cli::parse_config(quartic_config(0.05));
  const SolveResult direct = picard_solve(cfg.problem, [&] {
    PicardOptions o;
    o.tol = cfg.solver.tol;
    o.max_iter = cfg.solver.max_iter;
    return o;
  }());
  const auto [back_cfg, back] = cli::read_archive(ar);
  EXPECT_EQ(back.solution.w.coeffs(), direct.solution.w.coeffs());
  EXPECT_EQ(back.solution.mu.coeffs(), direct.solution.mu.coeffs());
  EXPECT_EQ(back.solution.u_mean, direct.solution.u_mean);
  EXPECT_EQ(back_cfg.problem.grid, cfg.problem.grid);
  EXPECT_TRUE(back.report["converged"].get<bool>());
}

TEST_F(CliTest, NonConvergenceExitsTwo) {
  json c = quartic_config(3.0);
  c["solver"]["max_iter"] = 5;
  c["data"]["allow_signed_density"] = true;
  EXPECT_EQ(run({"solve", "--config", write_config(c).string(), "--out", (dir_ / "ar").string()}), cli::not_converged)
      << err_.str();
}

TEST_F(CliTest, EmptySweepIsUsageError) {
  json c = quartic_config(0.01);
  c["sweep"] = {{"parameter", "delta"}, {"values", json::array()}};
  EXPECT_EQ(run({"sweep", "--config", write_config(c).string(), "--out", (dir_ / "s").string()}), cli::usage_error);
}

TEST_F(CliTest, DeltaSweepWithThreadsMatchesSequential) {
  json c = quartic_config(0.01);
  c["sweep"] = {{"parameter", "delta"}, {"values", {0.01, 0.02, 0.05, 0.1}}};
  const fs::path cfg = write_config(c);
  ASSERT_EQ(run({"sweep", "--config", cfg.string(), "--out", (dir_ / "a").string()}), cli::ok);
  ASSERT_EQ(run({"sweep", "--threads", "3", "--config", cfg.string(), "--out", (dir_ / "b").string()}), cli::ok);
  const auto a = read_tsv(dir_ / "a" / "sweep.tsv"), b = read_tsv(dir_ / "b" / "sweep.tsv");
  ASSERT_EQ(a.size(), 5u);
  EXPECT_EQ(a, b);
  for (std::size_t r = 1; r < a.size(); ++r) EXPECT_EQ(a[r][1], "yes");
}

TEST_F(CliTest, ZeroModelEpsilonSweepGivesIdenticalRows) {
  json c = heat_config();
  c["sweep"] = {{"parameter", "epsilon"}, {"values", {-0.5, 0.0, 0.5, 1.0}}};
  c["continuation"] = {{"eps_max", 1.0}, {"steps", 2}};
  ASSERT_EQ(run({"sweep", "--config", write_config(c).string(), "--out", (dir_ / "s").string()}), cli::ok) << err_.str();
  const auto rows = read_tsv(dir_ / "s" / "sweep.tsv");
  ASSERT_EQ(rows.size(), 5u);
  for (std::size_t r = 2; r < rows.size(); ++r)
    for (std::size_t col = 1; col < rows[r].size(); ++col) EXPECT_EQ(rows[r][col], rows[1][col]) << r << " " << col;
  EXPECT_EQ(read_tsv(dir_ / "s" / "branch.tsv").size(), 1u + 5u);
  const json branch = json::parse(std::ifstream(dir_ / "s" / "branch.json"));
  EXPECT_TRUE(branch["epsilon0_estimate"].is_null());
}

TEST_F(CliTest, OutputDirectoryFromEnvironment) {
  const fs::path env_dir = dir_ / "from_env";
  ::setenv("MFG_OUTPUT_DIR", env_dir.c_str(), 1);
  const int code = run({"solve", "--config", write_config(heat_config()).string()});
  ::unsetenv("MFG_OUTPUT_DIR");
  ASSERT_EQ(code, cli::ok);
  EXPECT_TRUE(fs::exists(env_dir / "metadata.json"));

  json c = heat_config();
  c["output"] = {{"directory", (dir_ / "from_config").string()}};
  ::setenv("MFG_OUTPUT_DIR", env_dir.c_str(), 1);
  const int code2 = run({"solve", "--config", write_config(c).string()});
  ::unsetenv("MFG_OUTPUT_DIR");
  ASSERT_EQ(code2, cli::ok);
  EXPECT_TRUE(fs::exists(dir_ / "from_config" / "metadata.json"));
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run({}), cli::usage_error);
  EXPECT_EQ(run({"frobnicate"}), cli::usage_error);
  EXPECT_EQ(run({"solve"}), cli::usage_error);
  EXPECT_EQ(run({"solve", "--config", (dir_ / "nope.json").string()}), cli::usage_error);
  EXPECT_EQ(run({"solve", "--config", write_config(heat_config()).string(), "--format", "csv"}), cli::usage_error);
  EXPECT_EQ(run({"--version"}), cli::ok);
  EXPECT_NE(out_.str().find(cli::version), std::string::npos);
  EXPECT_EQ(run({"--help"}), cli::ok);
}

TEST_F(CliTest, MalformedJsonIsUsageError) {
  const fs::path p = dir_ / "bad.json";
  std::ofstream(p) << "{\"problem\": ";
  EXPECT_EQ(run({"solve", "--config", p.string(), "--out", (dir_ / "ar").string()}), cli::usage_error);
  EXPECT_FALSE(fs::exists(dir_ / "ar"));
}

TEST_F(CliTest, FuzzedInvalidConfigsAreRejected) {
  using Mutation = std::function<void(json&)>;
  const std::vector<Mutation> mutations{
      [](json& c) { c["problem"]["alpha"] = 0.0; },
      [](json& c) { c["problem"]["alpha"] = 0.75; },
      [](json& c) { c["problem"]["N"] = 15; },
      [](json& c) { c["problem"]["N"] = 0; },
      [](json& c) { c["problem"]["T"] = -1.0; },
      [](json& c) { c["problem"]["K"] = -2; },
      [](json& c) { c["problem"]["kind"] = "neither"; },
      [](json& c) { c["problem"]["n"] = 0; },
      [](json& c) { c["hamiltonian"]["name"] = "unknown"; },
      [](json& c) { c["data"]["mu0"] = json::array({{{"k", {0}}, {"re", 0.1}}}); },
      [](json& c) { c["data"]["mu0"] = json::array({{{"k", {1}}, {"re", 1.0}}}); },
      [](json& c) { c["data"]["mu0"] = json::array({{{"k", {99}}, {"re", 0.01}}}); },
      [](json& c) { c["data"]["mu0"] = json::array({{{"k", {1, 1}}, {"re", 0.01}}}); },
      [](json& c) { c["data"].erase("wT"); },
      [](json& c) { c["data"]["mu0"] = {{"preset", "mystery"}}; },
      [](json& c) { c["solver"]["tol"] = -1.0; },
      [](json& c) { c["solver"]["max_iter"] = 0; },
      [](json& c) { c["problem"]["T"] = "one"; },
      [](json& c) { c.erase("problem"); },
  };
  std::mt19937 rng(7);
  for (std::size_t trial = 0; trial < 40; ++trial) {
    json c = heat_config();
    const std::size_t first = trial < mutations.size() ? trial : rng() % mutations.size();
    mutations[first](c);
    if (trial >= mutations.size()) mutations[rng() % mutations.size()](c);
    const fs::path ar = dir_ / ("ar" + std::to_string(trial));
    EXPECT_EQ(run({"solve", "--config", write_config(c).string(), "--out", ar.string()}), cli::usage_error)
        << "trial " << trial << ": " << c.dump();
    EXPECT_FALSE(fs::exists(ar)) << trial;
  }
}
