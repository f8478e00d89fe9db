#pragma once

// Transient simulation: windowed harmonic input, an adaptive explicit
// Runge-Kutta 5(4) integrator with dense output, Monte-Carlo sampling of the
// output and the transient Galerkin reference solution.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sparsepce/galerkin.hpp"
#include "sparsepce/sysmodel.hpp"

namespace sparsepce::timedomain {

/// Equidistant output points t_j = j T / r for j = 1..r.
struct TimeGrid {
  double final_time = 500.0;
  int count = 1000;

  TimeGrid() = default;
  TimeGrid(double final_time, int count);

  double at(int j) const { return final_time * (j + 1) / count; }  // 0-based j
  std::vector<double> points() const;
};

/// u(t) = sin(omega0 t) on [0, T], zero elsewhere.
struct InputSignal {
  double omega0 = 0.1;
  double final_time = 500.0;

  double operator()(double t) const;
};

double input_signal(double t, double omega0, double final_time);

/// ||u||_L2 = sqrt(T/2 - sin(2 omega0 T) / (4 omega0)).
double input_l2_norm(double omega0, double final_time);

struct IntegratorOptions {
  double rtol = 1e-6;
  double atol = 1e-8;
  std::size_t max_steps = 50'000'000;
};

struct IntegrationStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t rhs_evaluations = 0;
};

/// dx/dt = f(t, x), written into the third argument.
using OdeRhs = std::function<void(double, const Eigen::VectorXd&, Eigen::VectorXd&)>;

/// Called once per output time, in order, with the interpolated state.
using OutputObserver = std::function<void(std::size_t, const Eigen::VectorXd&)>;

/// Dormand-Prince 5(4) with PI step control and the quartic continuous
/// extension; output times are served by interpolation, not by step
/// clipping. Output times must be non-decreasing within [t0, t_end].
/// Throws NumericalError on step size underflow or when max_steps is hit.
IntegrationStats integrate_ivp(const OdeRhs& rhs, Eigen::VectorXd x0, double t0, double t_end,
                               std::span<const double> output_times,
                               const IntegratorOptions& options, const OutputObserver& observer);

/// As above, collecting the states as columns of a dim x r matrix.
Eigen::MatrixXd integrate_ivp(const OdeRhs& rhs, Eigen::VectorXd x0, double t0, double t_end,
                              std::span<const double> output_times,
                              const IntegratorOptions& options, IntegrationStats* stats = nullptr);

/// Right-hand side of E x' = A x + B u(t) with E factored once.
OdeRhs linear_rhs(const sysmodel::StateSpace& sys, InputSignal input);

/// Right-hand side of the Galerkin system with its sparse mass matrix
/// factored once.
OdeRhs galerkin_rhs(const galerkin::GalerkinSystem& gsys, InputSignal input);

/// k x n_par points drawn i.i.d. from the parameter box with a seeded
/// 64-bit Mersenne Twister; identical seeds give identical points.
Eigen::MatrixXd sample_parameters(const polychaos::UniformDistribution& dist, int k,
                                  std::uint64_t seed);

struct TrajectoryMatrix {
  Eigen::MatrixXd values;   // k x r, row i is y(t_j, p_i)
  Eigen::MatrixXd samples;  // k x n_par
  TimeGrid grid;
  std::uint64_t seed = 0;
};

/// Output trajectories y(t_j, p_i) = C x(t_j, p_i) from zero initial state
/// for the given sample points.
TrajectoryMatrix simulate_samples(const sysmodel::AffineParametricSystem& sys,
                                  Eigen::MatrixXd samples, const TimeGrid& grid,
                                  const InputSignal& input, const IntegratorOptions& options,
                                  unsigned threads = 1);

/// Draws k points from the distribution and simulates them.
TrajectoryMatrix sample_qoi(const sysmodel::AffineParametricSystem& sys, int k,
                            std::uint64_t seed, const TimeGrid& grid, const InputSignal& input,
                            const IntegratorOptions& options, unsigned threads = 1);

/// Transient Galerkin outputs w_hat(t_j) = C_hat v_hat(t_j), v_hat(0) = 0;
/// returns an m x r matrix.
Eigen::MatrixXd solve_galerkin_ivp(const galerkin::GalerkinSystem& gsys, const TimeGrid& grid,
                                   const InputSignal& input, const IntegratorOptions& options,
                                   IntegrationStats* stats = nullptr);

/// Mean (coefficient 0) and standard deviation (norm of the remaining
/// coefficients) per time point.
struct OutputStatistics {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;
};
OutputStatistics output_statistics(const Eigen::MatrixXd& coefficients);

}  // namespace sparsepce::timedomain
