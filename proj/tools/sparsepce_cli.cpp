// sparsepce: assemble / hnorms / run on a JSON experiment config.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "sparsepce/errors.hpp"
#include "sparsepce/experiment.hpp"

namespace {

enum Exit { kOk = 0, kConfig = 2, kNumerical = 3, kIo = 4 };

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse polynomial chaos approximations of random linear dynamical systems"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  bool quiet = false;
  bool save_matrices = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file (omit for the default benchmark)");
    sub->add_option("--out", out, "output directory");
    sub->add_option("--seed", seed, "sampling seed, overrides the config");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::Range(1u, 1024u));
    sub->add_flag("--quiet", quiet, "only log warnings and errors");
  };
  auto* assemble = app.add_subcommand("assemble", "assemble the Galerkin system and check stability");
  add_common(assemble);
  assemble->add_flag("--save-matrices", save_matrices, "also write E, A, B, C as binary matrices");
  auto* hnorms = app.add_subcommand("hnorms", "H2 / H-infinity norms of the output components");
  add_common(hnorms);
  auto* run = app.add_subcommand("run", "full pipeline: sampling, reference, OMP, LSQ, comparison");
  add_common(run);
  run->add_flag("--save-matrices", save_matrices, "also write E, A, B, C as binary matrices");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  spdlog::set_level(quiet ? spdlog::level::warn : spdlog::level::info);
  spdlog::set_pattern("[%l] %v");

  using namespace sparsepce;
  try {
    experiment::ExperimentConfig config;
    if (!config_path.empty()) config = experiment::load_config(config_path);
    if (seed) config.seed = *seed;

    experiment::RunOptions options;
    options.output_dir = experiment::resolve_output_dir(out, config);
    options.threads = threads;
    options.save_matrices = save_matrices;

    if (assemble->parsed()) {
      const auto s = experiment::run_assemble(config, options);
      std::cout << "m = " << s.m << ", dimension = " << s.dimension
                << ", spectral abscissa = " << s.abscissa << ", assembly " << s.assembly_seconds
                << " s, stability " << s.stability_seconds << " s\n";
    } else if (hnorms->parsed()) {
      experiment::run_hnorms(config, options);
    } else {
      experiment::run_pipeline(config, options);
    }
    if (!quiet) std::cout << "outputs in " << options.output_dir.string() << '\n';
    return kOk;
  } catch (const ConfigError& e) {
    spdlog::error("config: {}", e.what());
    return kConfig;
  } catch (const IoError& e) {
    spdlog::error("i/o: {}", e.what());
    return kIo;
  } catch (const NumericalError& e) {
    spdlog::error("numerical: {}", e.what());
    return kNumerical;
  } catch (const std::invalid_argument& e) {
    spdlog::error("invalid argument: {}", e.what());
    return kConfig;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kNumerical;
  }
}
