#include "sparsepce/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <utility>

#include <spdlog/spdlog.h>

#include "sparsepce/errors.hpp"
#include "sparsepce/galerkin.hpp"
#include "sparsepce/io.hpp"
#include "sparsepce/polychaos.hpp"
#include "sparsepce/sparsesel.hpp"
#include "sparsepce/timedomain.hpp"

namespace sparsepce::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read_key(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

Eigen::MatrixXd unflatten(const std::vector<double>& v, int n, const std::string& what) {
  if (v.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n))
    throw ConfigError(what + ": expected " + std::to_string(n * n) + " row-major entries");
  Eigen::MatrixXd M(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) M(r, c) = v[static_cast<std::size_t>(r * n + c)];
  return M;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  if (j.is_null()) return c;
  reject_unknown(j,
                 {"system", "delta", "degree", "input", "time_grid", "integrator", "frequency",
                  "sampling", "sparsity", "output"},
                 "config");
  if (j.contains("system")) {
    const json& s = j.at("system");
    reject_unknown(s, {"kind", "means", "order", "E", "A", "B", "C"}, "system");
    std::string kind = "mass_spring_damper";
    read_key(s, "kind", kind, "system");
    if (kind == "mass_spring_damper") {
      c.system.kind = SystemSpec::Kind::mass_spring_damper;
    } else if (kind == "affine") {
      c.system.kind = SystemSpec::Kind::affine;
    } else {
      throw ConfigError("system.kind must be 'mass_spring_damper' or 'affine', got '" + kind + "'");
    }
    read_key(s, "means", c.system.means, "system");
    read_key(s, "order", c.system.order, "system");
    read_key(s, "E", c.system.E, "system");
    read_key(s, "A", c.system.A, "system");
    read_key(s, "B", c.system.B, "system");
    read_key(s, "C", c.system.C, "system");
  }
  read_key(j, "delta", c.delta, "config");
  read_key(j, "degree", c.degree, "config");
  if (j.contains("input")) {
    reject_unknown(j.at("input"), {"omega0", "final_time"}, "input");
    read_key(j.at("input"), "omega0", c.omega0, "input");
    read_key(j.at("input"), "final_time", c.final_time, "input");
  }
  if (j.contains("time_grid")) {
    reject_unknown(j.at("time_grid"), {"points"}, "time_grid");
    read_key(j.at("time_grid"), "points", c.time_points, "time_grid");
  }
  if (j.contains("integrator")) {
    reject_unknown(j.at("integrator"), {"rtol", "atol"}, "integrator");
    read_key(j.at("integrator"), "rtol", c.rtol, "integrator");
    read_key(j.at("integrator"), "atol", c.atol, "integrator");
  }
  if (j.contains("frequency")) {
    reject_unknown(j.at("frequency"), {"omega_min", "omega_max", "points", "tail"}, "frequency");
    read_key(j.at("frequency"), "omega_min", c.omega_min, "frequency");
    read_key(j.at("frequency"), "omega_max", c.omega_max, "frequency");
    read_key(j.at("frequency"), "points", c.frequency_points, "frequency");
    std::string tail = "asymptotic";
    read_key(j.at("frequency"), "tail", tail, "frequency");
    if (tail == "asymptotic") {
      c.h2_tail = galerkin::TailRule::asymptotic;
    } else if (tail == "truncate") {
      c.h2_tail = galerkin::TailRule::truncate;
    } else {
      throw ConfigError("frequency.tail must be 'asymptotic' or 'truncate', got '" + tail + "'");
    }
  }
  if (j.contains("sampling")) {
    reject_unknown(j.at("sampling"), {"samples", "seed"}, "sampling");
    read_key(j.at("sampling"), "samples", c.samples, "sampling");
    read_key(j.at("sampling"), "seed", c.seed, "sampling");
  }
  if (j.contains("sparsity")) {
    reject_unknown(j.at("sparsity"), {"q_max"}, "sparsity");
    read_key(j.at("sparsity"), "q_max", c.q_max, "sparsity");
  }
  if (j.contains("output")) {
    std::string out;
    read_key(j, "output", out, "config");
    c.output = out;
  }
  return c;
}

json ExperimentConfig::to_json() const {
  json s;
  if (system.kind == SystemSpec::Kind::mass_spring_damper) {
    s = {{"kind", "mass_spring_damper"}, {"means", system.means}};
  } else {
    s = {{"kind", "affine"}, {"means", system.means}, {"order", system.order}, {"E", system.E},
         {"A", system.A},    {"B", system.B},         {"C", system.C}};
  }
  json j = {{"system", s},
            {"delta", delta},
            {"degree", degree},
            {"input", {{"omega0", omega0}, {"final_time", final_time}}},
            {"time_grid", {{"points", time_points}}},
            {"integrator", {{"rtol", rtol}, {"atol", atol}}},
            {"frequency",
             {{"omega_min", omega_min},
              {"omega_max", omega_max},
              {"points", frequency_points},
              {"tail", h2_tail == galerkin::TailRule::asymptotic ? "asymptotic" : "truncate"}}},
            {"sampling", {{"samples", samples}, {"seed", seed}}},
            {"sparsity", {{"q_max", q_max}}}};
  if (output) j["output"] = *output;
  return j;
}

void ExperimentConfig::validate() const {
  if (!(delta >= 0.0) || !std::isfinite(delta)) throw ConfigError("delta must be >= 0");
  if (delta >= 1.0) throw ConfigError("delta must be < 1 so parameters keep their sign");
  if (degree < 0) throw ConfigError("degree must be >= 0");
  if (system.means.empty()) throw ConfigError("system.means must not be empty");
  for (double mu : system.means)
    if (!std::isfinite(mu) || mu == 0.0) throw ConfigError("system.means must be finite and nonzero");
  if (system.kind == SystemSpec::Kind::mass_spring_damper) {
    if (system.means.size() != sysmodel::kMassSpringDamperParams)
      throw ConfigError("mass_spring_damper needs 14 means");
    for (double mu : system.means)
      if (!(mu > 0.0)) throw ConfigError("mass_spring_damper means must be positive");
  } else {
    if (system.order < 1) throw ConfigError("affine system needs order >= 1");
    const std::size_t terms = system.means.size() + 1;
    if (system.E.size() != terms || system.A.size() != terms)
      throw ConfigError("affine system needs n_par + 1 matrices in E and A");
    if (system.B.size() != static_cast<std::size_t>(system.order) ||
        system.C.size() != static_cast<std::size_t>(system.order))
      throw ConfigError("affine system: B and C need 'order' entries");
  }
  try {
    polychaos::basis_cardinality(static_cast<int>(system.means.size()), degree);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!(omega0 > 0.0)) throw ConfigError("input.omega0 must be > 0");
  if (!(final_time > 0.0) || !std::isfinite(final_time)) throw ConfigError("input.final_time must be > 0");
  if (time_points < 1) throw ConfigError("time_grid.points must be >= 1");
  if (!(rtol > 0.0) || !(atol >= 0.0)) throw ConfigError("integrator needs rtol > 0, atol >= 0");
  if (!(omega_min > 0.0) || !(omega_max > omega_min))
    throw ConfigError("frequency needs 0 < omega_min < omega_max");
  if (frequency_points < 2) throw ConfigError("frequency.points must be >= 2");
  if (samples < 1) throw ConfigError("sampling.samples must be >= 1");
  if (q_max < 1) throw ConfigError("sparsity.q_max must be >= 1");
}

void ExperimentConfig::validate_for_run() const {
  validate();
  const auto m = polychaos::basis_cardinality(static_cast<int>(system.means.size()), degree);
  if (q_max >= samples)
    throw ConfigError("sparsity.q_max (" + std::to_string(q_max) +
                      ") must be smaller than sampling.samples (" + std::to_string(samples) + ")");
  if (static_cast<std::size_t>(q_max) > m)
    throw ConfigError("sparsity.q_max (" + std::to_string(q_max) + ") exceeds the basis size " +
                      std::to_string(m));
  if (static_cast<std::size_t>(samples) >= m)
    spdlog::warn("k = {} samples is not below the basis size m = {}; the sparse regime assumes k < m",
                 samples, m);
}

std::string ExperimentConfig::hash() const {
  json j = to_json();
  j.erase("output");
  const std::string canonical = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : canonical) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(is, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return ExperimentConfig::from_json(j);
}

sysmodel::AffineParametricSystem build_system(const ExperimentConfig& config) {
  config.validate();
  if (config.system.kind == SystemSpec::Kind::mass_spring_damper)
    return sysmodel::build_mass_spring_damper(config.system.means, config.delta);
  const int n = config.system.order;
  std::vector<Eigen::MatrixXd> E, A;
  for (std::size_t l = 0; l < config.system.E.size(); ++l) {
    E.push_back(unflatten(config.system.E[l], n, "system.E[" + std::to_string(l) + "]"));
    A.push_back(unflatten(config.system.A[l], n, "system.A[" + std::to_string(l) + "]"));
  }
  const Eigen::VectorXd B = Eigen::Map<const Eigen::VectorXd>(config.system.B.data(), n);
  const Eigen::RowVectorXd C = Eigen::Map<const Eigen::RowVectorXd>(config.system.C.data(), n);
  return sysmodel::AffineParametricSystem(std::move(E), std::move(A), B, C,
                                          polychaos::UniformDistribution(config.system.means,
                                                                         config.delta));
}

fs::path resolve_output_dir(const std::optional<std::string>& flag, const ExperimentConfig& config) {
  if (flag && !flag->empty()) return *flag;
  if (config.output && !config.output->empty()) return *config.output;
  if (const char* env = std::getenv("SPARSEPCE_OUT"); env && *env) return env;
  return "sparsepce_out";
}

namespace {

using Clock = std::chrono::steady_clock;

struct StageLog {
  std::vector<std::pair<std::string, double>> seconds;
  std::vector<std::string> outputs;
};

// Runs one stage, recording its wall-clock time and tagging any failure with
// the stage name while keeping the exception category.
template <typename F>
auto run_stage(const std::string& name, StageLog& log, F&& body) {
  spdlog::info("stage {}: start", name);
  const auto start = Clock::now();
  auto finish = [&] {
    const double s = std::chrono::duration<double>(Clock::now() - start).count();
    log.seconds.emplace_back(name, s);
    spdlog::info("stage {}: {:.2f} s", name, s);
  };
  try {
    if constexpr (std::is_void_v<decltype(body())>) {
      body();
      finish();
    } else {
      auto result = body();
      finish();
      return result;
    }
  } catch (const ConfigError& e) {
    throw ConfigError("[" + name + "] " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError("[" + name + "] " + e.what());
  } catch (const IoError& e) {
    throw IoError("[" + name + "] " + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument("[" + name + "] " + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error("[" + name + "] " + e.what());
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
}

struct Assembled {
  sysmodel::AffineParametricSystem system;
  std::shared_ptr<const polychaos::BasisSet> basis;
  galerkin::GalerkinSystem gsys;
  sysmodel::SpectralInfo spectral;
  AssembleSummary summary;
};

Assembled assemble_and_check(const ExperimentConfig& config, const RunOptions& options,
                             StageLog& log) {
  Assembled a{build_system(config), nullptr, {}, {}, {}};
  const auto t0 = Clock::now();
  a.basis = std::make_shared<const polychaos::BasisSet>(
      polychaos::BasisSet::for_distribution(a.system.distribution(), config.degree));
  a.gsys = run_stage("assemble", log, [&] { return galerkin::assemble(a.system, a.basis); });
  const auto t1 = Clock::now();
  a.spectral = run_stage("stability", log, [&] { return galerkin::stability(a.gsys); });
  const auto t2 = Clock::now();

  AssembleSummary& s = a.summary;
  s.n = a.gsys.n;
  s.n_par = a.system.num_params();
  s.degree = config.degree;
  s.m = a.gsys.m;
  s.dimension = static_cast<long long>(a.gsys.dimension());
  s.nonzeros_E = static_cast<long long>(a.gsys.E.nonZeros());
  s.nonzeros_A = static_cast<long long>(a.gsys.A.nonZeros());
  s.abscissa = a.spectral.abscissa;
  s.assembly_seconds = std::chrono::duration<double>(t1 - t0).count();
  s.stability_seconds = std::chrono::duration<double>(t2 - t1).count();

  ensure_dir(options.output_dir);
  const fs::path summary_path = options.output_dir / "galerkin_summary.csv";
  io::write_csv(summary_path, {"key", "value"},
                {{"n", std::to_string(s.n)},
                 {"n_par", std::to_string(s.n_par)},
                 {"degree", std::to_string(s.degree)},
                 {"m", std::to_string(s.m)},
                 {"dimension", std::to_string(s.dimension)},
                 {"nonzeros_E", std::to_string(s.nonzeros_E)},
                 {"nonzeros_A", std::to_string(s.nonzeros_A)},
                 {"spectral_abscissa", io::format_number(s.abscissa)},
                 {"stable", a.spectral.stable() ? "1" : "0"}});
  log.outputs.push_back(summary_path.filename().string());
  // Timings are not deterministic; keep them out of the summary CSV.
  spdlog::info("Galerkin system: m = {}, dimension = {}, spectral abscissa = {:.6g}", s.m,
               s.dimension, s.abscissa);

  if (options.save_matrices) {
    io::write_matrix(options.output_dir / "galerkin_E.bin", Eigen::MatrixXd(a.gsys.E));
    io::write_matrix(options.output_dir / "galerkin_A.bin", Eigen::MatrixXd(a.gsys.A));
    io::write_matrix(options.output_dir / "galerkin_B.bin", a.gsys.B);
    io::write_matrix(options.output_dir / "galerkin_C.bin", Eigen::MatrixXd(a.gsys.C));
    for (const char* f : {"galerkin_E.bin", "galerkin_A.bin", "galerkin_B.bin", "galerkin_C.bin"})
      log.outputs.emplace_back(f);
  }
  if (!a.spectral.stable())
    throw NumericalError("Galerkin system is not asymptotically stable (spectral abscissa " +
                         io::format_number(a.spectral.abscissa) + ")");
  return a;
}

galerkin::FrequencyAnalysis frequency_stage(const ExperimentConfig& config, const RunOptions& options,
                                            const Assembled& a, StageLog& log) {
  const auto grid =
      galerkin::FrequencyGrid::log_spaced(config.omega_min, config.omega_max, config.frequency_points);
  auto fa = run_stage("hnorms", log,
                      [&] { return galerkin::analyze(a.gsys, grid, a.spectral, options.threads, config.h2_tail);
                      });

  std::vector<int> rank(static_cast<std::size_t>(a.gsys.m));
  for (std::size_t pos = 0; pos < fa.ranking.size(); ++pos)
    rank[static_cast<std::size_t>(fa.ranking[pos])] = static_cast<int>(pos) + 1;
  std::vector<std::vector<std::string>> rows;
  for (int i = 0; i < a.gsys.m; ++i) {
    rows.push_back({std::to_string(i + 1), std::to_string(a.basis->total_degree(i)),
                    io::format_number(fa.h2[i]), io::format_number(fa.hinf[i]),
                    std::to_string(rank[static_cast<std::size_t>(i)])});
  }
  io::write_csv(options.output_dir / "hnorms.csv", {"component", "degree", "h2", "hinf", "rank"}, rows);
  log.outputs.emplace_back("hnorms.csv");

  const double u_norm = timedomain::input_l2_norm(config.omega0, config.final_time);
  const Eigen::VectorXd unit = galerkin::error_bound_curve(fa.h2, 1.0);
  rows.clear();
  for (Eigen::Index q = 0; q < unit.size(); ++q) {
    const int component = fa.ranking[static_cast<std::size_t>(q)];
    rows.push_back({std::to_string(q + 1), std::to_string(component + 1),
                    io::format_number(unit[q]), io::format_number(unit[q] * u_norm)});
  }
  io::write_csv(options.output_dir / "error_bounds.csv",
                {"q", "added_component", "bound_unit_input", "bound_input"}, rows);
  log.outputs.emplace_back("error_bounds.csv");
  return fa;
}

void write_manifest(const ExperimentConfig& config, const RunOptions& options, const StageLog& log,
                    const std::string& status) {
  json stages = json::array();
  for (const auto& [name, s] : log.seconds) stages.push_back({{"stage", name}, {"seconds", s}});
  const json manifest = {{"status", status},
                         {"seed", config.seed},
                         {"config_hash", config.hash()},
                         {"config", config.to_json()},
                         {"threads", options.threads},
                         {"stages", stages},
                         {"outputs", log.outputs}};
  std::ofstream os(options.output_dir / "manifest.json");
  if (!os) throw IoError("cannot write manifest in " + options.output_dir.string());
  os << manifest.dump(2) << '\n';
}

}  // namespace

AssembleSummary run_assemble(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  StageLog log;
  return assemble_and_check(config, options, log).summary;
}

void run_hnorms(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  StageLog log;
  const Assembled a = assemble_and_check(config, options, log);
  frequency_stage(config, options, a, log);
}

void run_pipeline(const ExperimentConfig& config, const RunOptions& options) {
  config.validate_for_run();
  ensure_dir(options.output_dir);
  StageLog log;
  try {
    const Assembled a = assemble_and_check(config, options, log);
    const galerkin::FrequencyAnalysis fa = frequency_stage(config, options, a, log);

    const timedomain::TimeGrid grid(config.final_time, config.time_points);
    const timedomain::InputSignal input{config.omega0, config.final_time};
    const timedomain::IntegratorOptions integ{config.rtol, config.atol};
    const std::vector<double> times = grid.points();

    const auto samples = run_stage("sample", log, [&] {
      return timedomain::sample_qoi(a.system, config.samples, config.seed, grid, input, integ,
                                    options.threads);
    });
    {
      std::vector<std::vector<std::string>> rows;
      std::vector<std::string> header{"sample"};
      for (int l = 0; l < a.system.num_params(); ++l) header.push_back("p" + std::to_string(l + 1));
      for (Eigen::Index i = 0; i < samples.samples.rows(); ++i) {
        std::vector<std::string> row{std::to_string(i + 1)};
        for (Eigen::Index l = 0; l < samples.samples.cols(); ++l)
          row.push_back(io::format_number(samples.samples(i, l)));
        rows.push_back(std::move(row));
      }
      io::write_csv(options.output_dir / "sample_points.csv", header, rows);
      io::write_time_series(options.output_dir / "samples.csv", times, samples.values, "s");
      log.outputs.emplace_back("sample_points.csv");
      log.outputs.emplace_back("samples.csv");
    }

    const Eigen::MatrixXd reference = run_stage("reference", log, [&] {
      return timedomain::solve_galerkin_ivp(a.gsys, grid, input, integ);
    });
    {
      io::write_time_series(options.output_dir / "reference.csv", times, reference, "w");
      const auto stats = timedomain::output_statistics(reference);
      Eigen::MatrixXd table(2, grid.count);
      table.row(0) = stats.mean.transpose();
      table.row(1) = stats.stddev.transpose();
      std::vector<std::vector<std::string>> rows;
      for (int j = 0; j < grid.count; ++j)
        rows.push_back({io::format_number(times[static_cast<std::size_t>(j)]),
                        io::format_number(stats.mean[j]), io::format_number(stats.stddev[j])});
      io::write_csv(options.output_dir / "statistics.csv", {"time", "mean", "stddev"}, rows);
      log.outputs.emplace_back("reference.csv");
      log.outputs.emplace_back("statistics.csv");
    }

    const Eigen::MatrixXd V = a.basis->vandermonde(samples.samples);
    const auto lsq = run_stage("lsq", log, [&] {
      return sparsesel::lsq_fixed_basis(V, fa.ranking, samples.values, config.q_max);
    });
    const auto omp = run_stage("omp", log, [&] {
      return sparsesel::omp_over_time(V, samples.values, config.q_max, options.threads);
    });
    const auto report = run_stage("compare", log, [&] {
      return sparsesel::compare(*a.basis, V, reference, lsq, omp);
    });

    {
      std::vector<std::vector<std::string>> rows;
      for (int q = 1; q <= config.q_max; ++q) {
        const int c = fa.ranking[static_cast<std::size_t>(q - 1)];
        rows.push_back({std::to_string(q), std::to_string(c + 1),
                        std::to_string(a.basis->total_degree(c)), io::format_number(fa.h2[c])});
      }
      io::write_csv(options.output_dir / "lsq_basis.csv", {"q", "component", "degree", "h2"}, rows);

      rows.clear();
      std::vector<std::string> header{"time"};
      for (int q = 1; q <= config.q_max; ++q) header.push_back("select" + std::to_string(q));
      const auto& full = omp.back();
      for (int j = 0; j < grid.count; ++j) {
        std::vector<std::string> row{io::format_number(times[static_cast<std::size_t>(j)])};
        const auto& set = full.index_set(j);
        for (int q = 0; q < config.q_max; ++q)
          row.push_back(static_cast<std::size_t>(q) < set.size()
                            ? std::to_string(set[static_cast<std::size_t>(q)] + 1)
                            : "0");
        rows.push_back(std::move(row));
      }
      io::write_csv(options.output_dir / "omp_selection.csv", header, rows);

      rows.clear();
      header = {"q", "l2_lsq", "l2_omp", "res_lsq", "res_omp", "theta", "cond"};
      for (int d = 0; d <= config.degree; ++d) header.push_back("lsq_deg" + std::to_string(d));
      for (int d = 0; d <= config.degree; ++d) header.push_back("omp_deg" + std::to_string(d));
      for (const auto& r : report.rows) {
        std::vector<std::string> row{std::to_string(r.q),           io::format_number(r.l2_lsq),
                                     io::format_number(r.l2_omp),   io::format_number(r.residual_lsq),
                                     io::format_number(r.residual_omp), io::format_number(r.theta),
                                     io::format_number(r.condition)};
        for (double v : r.ratios_lsq) row.push_back(io::format_number(v));
        for (double v : r.ratios_omp) row.push_back(io::format_number(v));
        rows.push_back(std::move(row));
      }
      io::write_csv(options.output_dir / "comparison.csv", header, rows);
      for (const char* f : {"lsq_basis.csv", "omp_selection.csv", "comparison.csv"})
        log.outputs.emplace_back(f);
    }
    write_manifest(config, options, log, "complete");
  } catch (const std::exception& e) {
    try {
      write_manifest(config, options, log, std::string("failed: ") + e.what());
    } catch (...) {
      // The original failure is the one worth reporting.
    }
    throw;
  }
}

}  // namespace sparsepce::experiment
