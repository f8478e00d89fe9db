#pragma once

// Sparse recovery of polynomial chaos coefficients from output samples:
// orthogonal matching pursuit per time point, least squares on a fixed
// nested basis sequence, and the metrics used to compare the two.

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "sparsepce/incremental_qr.hpp"
#include "sparsepce/polychaos.hpp"

namespace sparsepce::sparsesel {

enum class Method { omp, lsq };

std::string_view to_string(Method method);

/// q-sparse representation over all time points.
struct SparseSolution {
  Method method = Method::lsq;
  int q = 0;
  /// One shared set when the basis is time-invariant (LSQ), otherwise one
  /// set per time point (OMP, in selection order). An OMP set can be shorter
  /// than q when the greedy iteration terminated early at that time point.
  std::vector<std::vector<int>> index_sets;
  Eigen::MatrixXd coefficients;  // q x r; row j pairs with index_set(t)[j]
  Eigen::VectorXd residuals;     // R(t) = ||V w(t) - y(t)||_2

  bool time_invariant() const { return index_sets.size() == 1; }
  Eigen::Index time_points() const { return coefficients.cols(); }
  const std::vector<int>& index_set(Eigen::Index t) const {
    return time_invariant() ? index_sets.front() : index_sets.at(static_cast<std::size_t>(t));
  }
  /// Coefficients at time t scattered into a length-m vector.
  Eigen::VectorXd embedded(Eigen::Index t, int m) const;
};

/// Greedy path for a single right-hand side.
struct OmpPath {
  enum class Stop { reached_q_max, residual_vanished, dependent_column };

  std::vector<int> selection;                 // columns in selection order
  std::vector<Eigen::VectorXd> coefficients;  // entry q-1 has q values
  std::vector<double> residuals;              // entry q-1 is R after q steps
  Stop stop = Stop::reached_q_max;

  int achieved() const { return static_cast<int>(selection.size()); }
};

/// Orthogonal matching pursuit with absolute, column-normalized correlation
/// and a QR factorization of the active columns grown by one Householder
/// column per step. Precomputes column norms once for reuse across many
/// right-hand sides.
class Omp {
 public:
  explicit Omp(const Eigen::MatrixXd& V);

  /// Runs q = 1..q_max (q_max <= min(k, m)). Stops early when the residual
  /// drops below 1e-13 ||y|| or the chosen column is numerically dependent
  /// on the active set (R diagonal below 1e-12 ||V||_F).
  OmpPath path(const Eigen::VectorXd& y, int q_max) const;

  const Eigen::MatrixXd& matrix() const { return *V_; }

 private:
  const Eigen::MatrixXd* V_;
  Eigen::VectorXd inv_norms_;
  double dependence_tolerance_;
};

OmpPath omp(const Eigen::MatrixXd& V, const Eigen::VectorXd& y, int q_max);

/// OMP independently at every time point (columns of Y, k x r); entry q-1
/// of the result is the q-sparse solution.
std::vector<SparseSolution> omp_over_time(const Eigen::MatrixXd& V, const Eigen::MatrixXd& Y,
                                          int q_max, unsigned threads = 1);

struct LsqWork {
  std::uint64_t factorization_updates = 0;
  std::uint64_t triangular_solves = 0;
};

/// Least squares on the nested sets I_q = {order[0], ..., order[q-1]} for
/// q = 1..q_max, all time points per q from one factorization that is
/// extended by one column from q - 1. Throws NumericalError naming q when
/// V_{I_q} is rank deficient.
std::vector<SparseSolution> lsq_fixed_basis(const Eigen::MatrixXd& V, std::span<const int> order,
                                            const Eigen::MatrixXd& Y, int q_max,
                                            LsqWork* work = nullptr);

/// R = ||V w - y||_2 for an embedded coefficient vector w.
double residual_norm(const Eigen::MatrixXd& V, const Eigen::VectorXd& w, const Eigen::VectorXd& y);

/// R / sqrt(k): sample estimate of the L2 distance to the true output.
double l2_estimate(double residual, Eigen::Index k);

/// ||w_ref - w||_2 / ||w_ref||_2, or nullopt when the reference is zero.
std::optional<double> l2_relative_error(const Eigen::VectorXd& reference,
                                        const Eigen::VectorXd& approx);

/// |a intersect b| / q for two sets of equal size q.
double intersection_ratio(std::span<const int> a, std::span<const int> b);

/// Fraction of the set's polynomials of each total degree 0..basis.degree().
std::vector<double> degree_ratios(std::span<const int> index_set, const polychaos::BasisSet& basis);

/// sigma_max / sigma_min; +infinity when V_I is numerically rank deficient.
double condition_number(const Eigen::MatrixXd& VI);

struct ComparisonRow {
  int q = 0;
  double l2_lsq = 0.0;
  double l2_omp = 0.0;
  double residual_lsq = 0.0;
  double residual_omp = 0.0;
  double theta = 0.0;
  double condition = 0.0;
  std::vector<double> ratios_lsq;
  std::vector<double> ratios_omp;
};

struct ComparisonReport {
  std::vector<ComparisonRow> rows;
  int degree = 0;
  std::size_t excluded_points = 0;  // time points with a zero reference
};

/// Means over time points of the error measures for both methods.
/// reference is the m x r Galerkin coefficient matrix.
ComparisonReport compare(const polychaos::BasisSet& basis, const Eigen::MatrixXd& V,
                         const Eigen::MatrixXd& reference,
                         const std::vector<SparseSolution>& lsq,
                         const std::vector<SparseSolution>& omp);

}  // namespace sparsepce::sparsesel
