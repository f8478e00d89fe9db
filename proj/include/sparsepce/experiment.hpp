#pragma once

// Experiment configuration and the assemble / hnorms / run pipelines behind
// the command line tool. Every stage persists its results as CSV under the
// output directory; `run` also writes manifest.json.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sparsepce/galerkin.hpp"
#include "sparsepce/sysmodel.hpp"

namespace sparsepce::experiment {

struct SystemSpec {
  enum class Kind { mass_spring_damper, affine };
  Kind kind = Kind::mass_spring_damper;
  std::vector<double> means = [] {
    const auto a = sysmodel::MassSpringDamperMeans{}.as_array();
    return std::vector<double>(a.begin(), a.end());
  }();
  // Affine systems only: order n and n_par + 1 row-major n x n matrices each.
  int order = 0;
  std::vector<std::vector<double>> E;
  std::vector<std::vector<double>> A;
  std::vector<double> B;
  std::vector<double> C;
};

struct ExperimentConfig {
  SystemSpec system;
  double delta = 0.05;
  int degree = 3;
  double omega0 = 0.1;
  double final_time = 500.0;
  int time_points = 1000;
  double rtol = 1e-6;
  double atol = 1e-8;
  double omega_min = 1e-2;
  double omega_max = 1e2;
  int frequency_points = 200;
  galerkin::TailRule h2_tail = galerkin::TailRule::asymptotic;
  int samples = 500;
  std::uint64_t seed = 1;
  int q_max = 100;
  std::optional<std::string> output;

  /// Parses the nested-key JSON layout; missing keys keep their defaults,
  /// unknown keys are rejected. Throws ConfigError.
  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  /// Checks shared by all subcommands. Throws ConfigError.
  void validate() const;
  /// Additional checks for the sampling and sparse-recovery stages.
  void validate_for_run() const;

  /// FNV-1a 64 of the canonical JSON serialization, as 16 hex digits.
  std::string hash() const;
};

ExperimentConfig load_config(const std::filesystem::path& path);

sysmodel::AffineParametricSystem build_system(const ExperimentConfig& config);

struct RunOptions {
  std::filesystem::path output_dir;
  unsigned threads = 1;
  bool save_matrices = false;
};

/// Output directory: explicit flag, else config key, else $SPARSEPCE_OUT,
/// else ./sparsepce_out.
std::filesystem::path resolve_output_dir(const std::optional<std::string>& flag,
                                         const ExperimentConfig& config);

struct AssembleSummary {
  int n = 0;
  int n_par = 0;
  int degree = 0;
  int m = 0;
  long long dimension = 0;
  long long nonzeros_E = 0;
  long long nonzeros_A = 0;
  double abscissa = 0.0;
  double assembly_seconds = 0.0;
  double stability_seconds = 0.0;
};

/// Writes galerkin_summary.csv (and, with save_matrices, the dense binary
/// matrices). Throws NumericalError if the Galerkin system is unstable.
AssembleSummary run_assemble(const ExperimentConfig& config, const RunOptions& options);

/// Writes hnorms.csv and error_bounds.csv.
void run_hnorms(const ExperimentConfig& config, const RunOptions& options);

/// Full pipeline; writes every intermediate CSV plus manifest.json.
void run_pipeline(const ExperimentConfig& config, const RunOptions& options);

}  // namespace sparsepce::experiment
