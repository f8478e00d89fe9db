#include "sparsepce/timedomain.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/SparseLU>

#include "sparsepce/errors.hpp"
#include "sparsepce/parallel.hpp"

namespace sparsepce::timedomain {

TimeGrid::TimeGrid(double T, int r) : final_time(T), count(r) {
  if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("TimeGrid: final time must be > 0");
  if (r < 1) throw std::invalid_argument("TimeGrid: needs at least one point");
}

std::vector<double> TimeGrid::points() const {
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int j = 0; j < count; ++j) out[static_cast<std::size_t>(j)] = at(j);
  return out;
}

double input_signal(double t, double omega0, double final_time) {
  if (t < 0.0 || t > final_time) return 0.0;
  return std::sin(omega0 * t);
}

double InputSignal::operator()(double t) const { return input_signal(t, omega0, final_time); }

double input_l2_norm(double omega0, double final_time) {
  if (!(omega0 > 0.0) || !(final_time > 0.0))
    throw std::invalid_argument("input_l2_norm: omega0 and T must be positive");
  const double x = 2.0 * omega0 * final_time;
  // T/2 - sin(x)/(4 omega0) = (x - sin x) / (4 omega0); for small x use the
  // series of x - sin x to avoid cancellation.
  double x_minus_sin;
  if (x < 1e-2) {
    const double x3 = x * x * x;
    x_minus_sin = x3 / 6.0 - x3 * x * x / 120.0 + x3 * x3 * x / 5040.0;
  } else {
    x_minus_sin = x - std::sin(x);
  }
  return std::sqrt(x_minus_sin / (4.0 * omega0));
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr std::array<double, 7> kC{0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double kA[7][6] = {
    {0, 0, 0, 0, 0, 0},
    {1.0 / 5, 0, 0, 0, 0, 0},
    {3.0 / 40, 9.0 / 40, 0, 0, 0, 0},
    {44.0 / 45, -56.0 / 15, 32.0 / 9, 0, 0, 0},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0, 0},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656, 0},
    {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
};
// Fifth-order weights minus embedded fourth-order weights.
constexpr std::array<double, 7> kErr{-71.0 / 57600,     0.0, 71.0 / 16695, -71.0 / 1920,
                                     17253.0 / 339200, -22.0 / 525, 1.0 / 40};
// Quartic continuous extension: x(t + th h) = x + h sum_i k_i (P_i . [th, th^2, th^3, th^4]).
constexpr double kP[7][4] = {
    {1.0, -8048581381.0 / 2820520608, 8663915743.0 / 2820520608, -12715105075.0 / 11282082432},
    {0, 0, 0, 0},
    {0, 131558114200.0 / 32700410799, -68118460800.0 / 10900136933, 87487479700.0 / 32700410799},
    {0, -1754552775.0 / 470086768, 14199869525.0 / 1410260304, -10690763975.0 / 1880347072},
    {0, 127303824393.0 / 49829197408, -318862633887.0 / 49829197408, 701980252875.0 / 199316789632},
    {0, -282668133.0 / 205662961, 2019193451.0 / 616988883, -1453857185.0 / 822651844},
    {0, 40617522.0 / 29380423, -110615467.0 / 29380423, 69997945.0 / 29380423},
};

constexpr double kSafety = 0.9;
constexpr double kMinFactor = 0.2;
constexpr double kMaxFactor = 5.0;
constexpr double kBeta = 0.04;                 // PI controller memory exponent
constexpr double kAlpha = 0.2 - 0.75 * kBeta;  // proportional exponent for a 5(4) pair

double scaled_rms(const Eigen::VectorXd& v, const Eigen::VectorXd& scale) {
  if (v.size() == 0) return 0.0;
  return std::sqrt((v.array() / scale.array()).square().mean());
}

double initial_step(const OdeRhs& rhs, double t0, const Eigen::VectorXd& x0,
                    const Eigen::VectorXd& f0, double span, const IntegratorOptions& opt,
                    IntegrationStats& stats) {
  const Eigen::VectorXd scale = (opt.atol + opt.rtol * x0.array().abs()).matrix();
  const double d0 = scaled_rms(x0, scale);
  const double d1 = scaled_rms(f0, scale);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, span);
  const Eigen::VectorXd x1 = x0 + h0 * f0;
  Eigen::VectorXd f1(x0.size());
  rhs(t0 + h0, x1, f1);
  ++stats.rhs_evaluations;
  const double d2 = scaled_rms(f1 - f0, scale) / h0;
  const double dmax = std::max(d1, d2);
  const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 1.0 / 5.0);
  return std::min({100.0 * h0, h1, span});
}

}  // namespace

IntegrationStats integrate_ivp(const OdeRhs& rhs, Eigen::VectorXd x, double t0, double t_end,
                               std::span<const double> output_times,
                               const IntegratorOptions& opt, const OutputObserver& observer) {
  if (!(t_end > t0)) throw std::invalid_argument("integrate_ivp: needs t_end > t0");
  if (!(opt.rtol > 0.0) || !(opt.atol >= 0.0))
    throw std::invalid_argument("integrate_ivp: needs rtol > 0 and atol >= 0");
  for (std::size_t j = 0; j < output_times.size(); ++j) {
    const double t = output_times[j];
    if (t < t0 || t > t_end || (j > 0 && t < output_times[j - 1]))
      throw std::invalid_argument("integrate_ivp: output times must be sorted within [t0, t_end]");
  }

  IntegrationStats stats;
  const Eigen::Index dim = x.size();
  std::array<Eigen::VectorXd, 7> k;
  for (auto& kk : k) kk.resize(dim);
  Eigen::VectorXd stage(dim), x_new(dim), err(dim), scale(dim), dense(dim);

  std::size_t next_out = 0;
  while (next_out < output_times.size() && output_times[next_out] <= t0) observer(next_out++, x);

  double t = t0;
  rhs(t, x, k[0]);
  ++stats.rhs_evaluations;
  double h = initial_step(rhs, t0, x, k[0], t_end - t0, opt, stats);
  double err_old = 1e-4;
  bool rejected_last = false;

  while (t < t_end) {
    if (stats.accepted + stats.rejected >= opt.max_steps)
      throw NumericalError("integrate_ivp: maximum number of steps exceeded at t = " +
                           std::to_string(t));
    const double h_min = 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t));
    if (h < h_min)
      throw NumericalError("integrate_ivp: step size underflow at t = " + std::to_string(t));
    // Land exactly on t_end (and avoid a sliver of a final step).
    bool last = false;
    if (t + 1.01 * h >= t_end) {
      h = t_end - t;
      last = true;
    }

    for (int s = 1; s < 7; ++s) {
      stage = x;
      for (int j = 0; j < s; ++j)
        if (kA[s][j] != 0.0) stage.noalias() += (h * kA[s][j]) * k[static_cast<std::size_t>(j)];
      rhs(t + kC[static_cast<std::size_t>(s)] * h, stage, k[static_cast<std::size_t>(s)]);
    }
    stats.rhs_evaluations += 6;
    x_new = stage;  // stage 7 input equals the fifth-order solution (FSAL)

    err.setZero();
    for (std::size_t j = 0; j < 7; ++j)
      if (kErr[j] != 0.0) err.noalias() += (h * kErr[j]) * k[j];
    scale = (opt.atol + opt.rtol * x.array().abs().max(x_new.array().abs())).matrix();
    const double e = scaled_rms(err, scale);
    if (!std::isfinite(e))
      throw NumericalError("integrate_ivp: non-finite solution at t = " + std::to_string(t));

    if (e <= 1.0) {
      const double t_new = last ? t_end : t + h;
      while (next_out < output_times.size() && output_times[next_out] <= t_new) {
        const double theta = (output_times[next_out] - t) / h;
        const std::array<double, 4> powers{theta, theta * theta, theta * theta * theta,
                                           theta * theta * theta * theta};
        dense = x;
        for (std::size_t i = 0; i < 7; ++i) {
          const double b = kP[i][0] * powers[0] + kP[i][1] * powers[1] + kP[i][2] * powers[2] +
                           kP[i][3] * powers[3];
          if (b != 0.0) dense.noalias() += (h * b) * k[i];
        }
        observer(next_out++, dense);
      }
      t = t_new;
      x.swap(x_new);
      k[0].swap(k[6]);
      ++stats.accepted;

      double factor = e == 0.0 ? kMaxFactor
                               : kSafety * std::pow(e, -kAlpha) * std::pow(err_old, kBeta);
      factor = std::clamp(factor, kMinFactor, kMaxFactor);
      if (rejected_last) factor = std::min(factor, 1.0);
      h *= factor;
      err_old = std::max(e, 1e-4);
      rejected_last = false;
    } else {
      ++stats.rejected;
      h *= std::max(kMinFactor, kSafety * std::pow(e, -kAlpha));
      rejected_last = true;
    }
  }
  while (next_out < output_times.size()) observer(next_out++, x);
  return stats;
}

Eigen::MatrixXd integrate_ivp(const OdeRhs& rhs, Eigen::VectorXd x0, double t0, double t_end,
                              std::span<const double> output_times,
                              const IntegratorOptions& options, IntegrationStats* stats) {
  Eigen::MatrixXd states(x0.size(), static_cast<Eigen::Index>(output_times.size()));
  const IntegrationStats s =
      integrate_ivp(rhs, std::move(x0), t0, t_end, output_times, options,
                    [&](std::size_t j, const Eigen::VectorXd& x) {
                      states.col(static_cast<Eigen::Index>(j)) = x;
                    });
  if (stats) *stats = s;
  return states;
}

OdeRhs linear_rhs(const sysmodel::StateSpace& sys, InputSignal input) {
  auto lu = std::make_shared<const Eigen::PartialPivLU<Eigen::MatrixXd>>(sys.E);
  if (!(lu->rcond() > 64 * std::numeric_limits<double>::epsilon()))
    throw NumericalError("linear_rhs: mass matrix is singular");
  auto A = std::make_shared<const Eigen::MatrixXd>(sys.A);
  auto B = std::make_shared<const Eigen::VectorXd>(sys.B);
  return [lu, A, B, input](double t, const Eigen::VectorXd& x, Eigen::VectorXd& dx) {
    dx = lu->solve(*A * x + input(t) * *B);
  };
}

OdeRhs galerkin_rhs(const galerkin::GalerkinSystem& gsys, InputSignal input) {
  using Solver = Eigen::SparseLU<galerkin::SparseMatrix, Eigen::COLAMDOrdering<int>>;
  auto lu = std::make_shared<Solver>();
  lu->compute(gsys.E);
  if (lu->info() != Eigen::Success)
    throw NumericalError("galerkin_rhs: Galerkin mass matrix is singular");
  auto A = std::make_shared<const galerkin::SparseMatrix>(gsys.A);
  auto B = std::make_shared<const Eigen::VectorXd>(gsys.B);
  auto work = std::make_shared<Eigen::VectorXd>(gsys.dimension());
  return [lu, A, B, work, input](double t, const Eigen::VectorXd& x, Eigen::VectorXd& dx) {
    work->noalias() = *A * x;
    *work += input(t) * *B;
    dx = lu->solve(*work);
  };
}

Eigen::MatrixXd sample_parameters(const polychaos::UniformDistribution& dist, int k,
                                  std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("sample_parameters: k must be >= 1");
  std::mt19937_64 engine(seed);
  const auto domain = dist.domain();
  Eigen::MatrixXd out(k, static_cast<Eigen::Index>(dist.size()));
  for (int i = 0; i < k; ++i) {
    for (std::size_t l = 0; l < domain.size(); ++l) {
      // 53 random bits -> [0, 1); spelled out so the stream is the same on
      // every standard library.
      const double u = static_cast<double>(engine() >> 11) * 0x1.0p-53;
      out(i, static_cast<Eigen::Index>(l)) = domain[l].lower + (domain[l].upper - domain[l].lower) * u;
    }
  }
  return out;
}

TrajectoryMatrix simulate_samples(const sysmodel::AffineParametricSystem& sys,
                                  Eigen::MatrixXd samples, const TimeGrid& grid,
                                  const InputSignal& input, const IntegratorOptions& options,
                                  unsigned threads) {
  if (samples.cols() != sys.num_params())
    throw std::invalid_argument("simulate_samples: sample points have the wrong dimension");
  TrajectoryMatrix out;
  out.grid = grid;
  out.values.resize(samples.rows(), grid.count);
  const std::vector<double> times = grid.points();
  parallel_for(static_cast<std::size_t>(samples.rows()), threads, [&](std::size_t i) {
    const auto row = static_cast<Eigen::Index>(i);
    const Eigen::VectorXd p = samples.row(row).transpose();
    try {
      const sysmodel::StateSpace inst = sys.instantiate(std::span<const double>(p.data(), p.size()));
      const Eigen::RowVectorXd C = inst.C;
      integrate_ivp(linear_rhs(inst, input), Eigen::VectorXd::Zero(inst.order()), 0.0,
                    grid.final_time, times, options,
                    [&](std::size_t j, const Eigen::VectorXd& x) {
                      out.values(row, static_cast<Eigen::Index>(j)) = C.dot(x);
                    });
    } catch (const NumericalError& e) {
      throw NumericalError("sample " + std::to_string(i) + ": " + e.what());
    }
  });
  out.samples = std::move(samples);
  return out;
}

TrajectoryMatrix sample_qoi(const sysmodel::AffineParametricSystem& sys, int k,
                            std::uint64_t seed, const TimeGrid& grid, const InputSignal& input,
                            const IntegratorOptions& options, unsigned threads) {
  TrajectoryMatrix out = simulate_samples(sys, sample_parameters(sys.distribution(), k, seed), grid,
                                          input, options, threads);
  out.seed = seed;
  return out;
}

Eigen::MatrixXd solve_galerkin_ivp(const galerkin::GalerkinSystem& gsys, const TimeGrid& grid,
                                   const InputSignal& input, const IntegratorOptions& options,
                                   IntegrationStats* stats) {
  Eigen::MatrixXd w(gsys.m, grid.count);
  const std::vector<double> times = grid.points();
  const IntegrationStats s =
      integrate_ivp(galerkin_rhs(gsys, input), Eigen::VectorXd::Zero(gsys.dimension()), 0.0,
                    grid.final_time, times, options,
                    [&](std::size_t j, const Eigen::VectorXd& v) {
                      w.col(static_cast<Eigen::Index>(j)) = gsys.C * v;
                    });
  if (stats) *stats = s;
  return w;
}

OutputStatistics output_statistics(const Eigen::MatrixXd& coefficients) {
  if (coefficients.rows() < 1) throw std::invalid_argument("output_statistics: no coefficients");
  OutputStatistics out;
  out.mean = coefficients.row(0).transpose();
  if (coefficients.rows() > 1)
    out.stddev = coefficients.bottomRows(coefficients.rows() - 1).colwise().norm().transpose();
  else
    out.stddev = Eigen::VectorXd::Zero(coefficients.cols());
  return out;
}

}  // namespace sparsepce::timedomain
