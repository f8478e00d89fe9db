#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "sparsepce/errors.hpp"
#include "sparsepce/experiment.hpp"
#include "sparsepce/io.hpp"

using namespace sparsepce;
using namespace sparsepce::experiment;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sparsepce_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_file(const fs::path& dir, const std::string& name, const std::string& text) {
  std::ofstream(dir / name) << text;
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

int cli(const std::string& args) {
  const std::string cmd = std::string(SPARSEPCE_CLI) + " " + args + " --quiet > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kSmoke = R"({
  "degree": 1,
  "input": {"final_time": 40},
  "time_grid": {"points": 40},
  "sampling": {"samples": 10, "seed": 3},
  "sparsity": {"q_max": 5}
})";

}  // namespace

TEST(Config, DefaultsAndRoundTrip) {
  const auto c = ExperimentConfig::from_json(nlohmann::json::object());
  EXPECT_EQ(c.degree, 3);
  EXPECT_EQ(c.samples, 500);
  EXPECT_EQ(c.q_max, 100);
  EXPECT_EQ(c.time_points, 1000);
  EXPECT_DOUBLE_EQ(c.delta, 0.05);
  EXPECT_NO_THROW(c.validate_for_run());
  const auto back = ExperimentConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(back.hash(), c.hash());
  auto other = c;
  other.seed = 2;
  EXPECT_NE(other.hash(), c.hash());
}

TEST(Config, ValidationErrors) {
  using nlohmann::json;
  EXPECT_THROW(ExperimentConfig::from_json(json{{"delta", -0.1}}).validate(), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_json(json{{"bogus", 1}}), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_json(json{{"input", {{"omega", 1}}}}), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_json(json{{"degree", "three"}}), ConfigError);
  auto c = ExperimentConfig::from_json(json{{"sampling", {{"samples", 50}}}});
  EXPECT_NO_THROW(c.validate());
  EXPECT_THROW(c.validate_for_run(), ConfigError);  // q_max >= k
  c.q_max = 49;
  EXPECT_NO_THROW(c.validate_for_run());
  c.degree = 0;
  c.q_max = 2;
  EXPECT_THROW(c.validate_for_run(), ConfigError);  // q_max > m
}

TEST(Config, AffineSystem) {
  const auto c = ExperimentConfig::from_json(nlohmann::json::parse(R"({
    "system": {"kind": "affine", "means": [2.0], "order": 1,
               "E": [[1.0], [0.0]], "A": [[0.0], [-1.0]], "B": [1.0], "C": [1.0]},
    "degree": 2, "delta": 0.1})"));
  const auto sys = build_system(c);
  EXPECT_EQ(sys.order(), 1);
  EXPECT_EQ(sys.num_params(), 1);
  EXPECT_DOUBLE_EQ(sys.at_mean().A(0, 0), -2.0);
  auto bad = c;
  bad.system.E.pop_back();
  EXPECT_THROW(build_system(bad), ConfigError);
}

TEST(Config, OutputDirectoryPrecedence) {
  ExperimentConfig c;
  ::unsetenv("SPARSEPCE_OUT");
  EXPECT_EQ(resolve_output_dir(std::nullopt, c), fs::path("sparsepce_out"));
  ::setenv("SPARSEPCE_OUT", "/tmp/env_out", 1);
  EXPECT_EQ(resolve_output_dir(std::nullopt, c), fs::path("/tmp/env_out"));
  c.output = "cfg_out";
  EXPECT_EQ(resolve_output_dir(std::nullopt, c), fs::path("cfg_out"));
  EXPECT_EQ(resolve_output_dir(std::string("flag_out"), c), fs::path("flag_out"));
  ::unsetenv("SPARSEPCE_OUT");
}

TEST(Io, MatrixRoundTripAndCsv) {
  const auto dir = scratch("io");
  Eigen::MatrixXd M(2, 3);
  M << 1.5, -2.0, 1e-300, 0.1, 3.0, -0.0;
  io::write_matrix(dir / "m.bin", M);
  EXPECT_EQ(io::read_matrix(dir / "m.bin"), M);
  EXPECT_EQ(fs::file_size(dir / "m.bin"), 24u + 6u * 8u);
  EXPECT_EQ(slurp(dir / "m.bin").substr(0, 8), "SPCEMAT1");
  EXPECT_EQ(io::format_number(0.1), "0.1");
  EXPECT_EQ(io::format_number(1.0 / 0.0), "inf");
  const double times[] = {0.5, 1.0};
  io::write_time_series(dir / "ts.csv", times, M.leftCols(2), "w");
  const auto t = io::read_csv(dir / "ts.csv");
  EXPECT_EQ(t.header, (std::vector<std::string>{"time", "w1", "w2"}));
  EXPECT_EQ(t.values(1, 1), -2.0);
  EXPECT_EQ(t.values(0, 2), 0.1);
  EXPECT_THROW(io::read_matrix(dir / "missing.bin"), IoError);
}

TEST(Pipeline, AssembleDegreeZero) {
  auto c = ExperimentConfig::from_json(nlohmann::json{{"degree", 0}});
  const auto dir = scratch("assemble0");
  const auto s = run_assemble(c, RunOptions{dir, 1, true});
  EXPECT_EQ(s.m, 1);
  EXPECT_EQ(s.dimension, 8);
  EXPECT_LT(s.abscissa, 0.0);
  EXPECT_TRUE(fs::exists(dir / "galerkin_summary.csv"));
  EXPECT_EQ(io::read_matrix(dir / "galerkin_A.bin").rows(), 8);
  run_hnorms(c, RunOptions{dir, 1, false});
  EXPECT_EQ(io::read_csv(dir / "hnorms.csv").values.rows(), 1);
}

TEST(Pipeline, HnormsBoundsAreMonotone) {
  auto c = ExperimentConfig::from_json(nlohmann::json{{"degree", 2}});
  const auto dir = scratch("hnorms2");
  run_hnorms(c, RunOptions{dir, 1, false});
  const auto h = io::read_csv(dir / "hnorms.csv");
  EXPECT_EQ(h.values.rows(), 120);
  const auto b = io::read_csv(dir / "error_bounds.csv");
  ASSERT_EQ(b.values.rows(), 120);
  for (Eigen::Index q = 1; q < b.values.rows(); ++q) EXPECT_LE(b.values(q, 2), b.values(q - 1, 2));
}

TEST(Pipeline, UnstableSystemIsNumericalError) {
  const auto c = ExperimentConfig::from_json(nlohmann::json::parse(R"({
    "system": {"kind": "affine", "means": [1.0], "order": 1,
               "E": [[1.0], [0.0]], "A": [[0.5], [0.0]], "B": [1.0], "C": [1.0]},
    "degree": 1})"));
  EXPECT_THROW(run_assemble(c, RunOptions{scratch("unstable"), 1, false}), NumericalError);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli_codes");
  const auto bad = write_file(dir, "bad.json", R"({"delta": -0.1})");
  EXPECT_EQ(cli("assemble --config " + bad.string() + " --out " + dir.string()), 2);
  const auto garbage = write_file(dir, "garbage.json", "{ not json");
  EXPECT_EQ(cli("assemble --config " + garbage.string() + " --out " + dir.string()), 2);
  EXPECT_EQ(cli("assemble --config " + (dir / "nope.json").string()), 4);
  const auto unstable = write_file(dir, "unstable.json", R"({
    "system": {"kind": "affine", "means": [1.0], "order": 1,
               "E": [[1.0], [0.0]], "A": [[0.5], [0.0]], "B": [1.0], "C": [1.0]}})");
  EXPECT_EQ(cli("assemble --config " + unstable.string() + " --out " + dir.string()), 3);
  EXPECT_EQ(cli("frobnicate"), 2);
  const auto d0 = write_file(dir, "d0.json", R"({"degree": 0})");
  EXPECT_EQ(cli("assemble --config " + d0.string() + " --out " + (dir / "d0").string()), 0);
  EXPECT_NE(slurp(dir / "d0" / "galerkin_summary.csv").find("dimension,8"), std::string::npos);
}

TEST(Cli, SmokeRunIsReproducible) {
  const auto dir = scratch("cli_smoke");
  const auto cfg = write_file(dir, "smoke.json", kSmoke);
  ASSERT_EQ(cli("run --config " + cfg.string() + " --out " + (dir / "a").string()), 0);
  ASSERT_EQ(cli("run --config " + cfg.string() + " --out " + (dir / "b").string() + " --threads 3"), 0);
  for (const char* f : {"samples.csv", "sample_points.csv", "reference.csv", "statistics.csv",
                        "hnorms.csv", "error_bounds.csv", "comparison.csv", "lsq_basis.csv",
                        "omp_selection.csv", "galerkin_summary.csv"}) {
    ASSERT_TRUE(fs::exists(dir / "a" / f)) << f;
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
  const auto report = io::read_csv(dir / "a" / "comparison.csv");
  EXPECT_EQ(report.values.rows(), 5);
  EXPECT_EQ(report.header.size(), 7u + 2u * 2u);

  const auto manifest = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"));
  EXPECT_EQ(manifest["status"], "complete");
  EXPECT_EQ(manifest["seed"], 3);
  EXPECT_EQ(manifest["config_hash"], load_config(cfg).hash());
  EXPECT_GE(manifest["stages"].size(), 7u);
  // The persisted config reproduces the run.
  EXPECT_EQ(ExperimentConfig::from_json(manifest["config"]).hash(), manifest["config_hash"]);

  ASSERT_EQ(cli("run --config " + cfg.string() + " --out " + (dir / "c").string() + " --seed 4"), 0);
  EXPECT_NE(slurp(dir / "a" / "samples.csv"), slurp(dir / "c" / "samples.csv"));
}

TEST(Cli, FailedRunKeepsPartialOutputs) {
  const auto dir = scratch("cli_fail");
  // Tolerances this tight exhaust the step budget in the sampling stage.
  const auto cfg = write_file(dir, "fail.json", R"({
    "degree": 1, "input": {"final_time": 40}, "time_grid": {"points": 40},
    "integrator": {"rtol": 1e-300, "atol": 0},
    "sampling": {"samples": 10}, "sparsity": {"q_max": 5}})");
  EXPECT_EQ(cli("run --config " + cfg.string() + " --out " + dir.string()), 3);
  EXPECT_TRUE(fs::exists(dir / "hnorms.csv"));
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  EXPECT_NE(manifest["status"].get<std::string>().find("[sample]"), std::string::npos);
}
