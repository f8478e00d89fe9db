#pragma once

// Stochastic Galerkin projection of an affine-parametric system onto a
// polynomial chaos basis, and its frequency-domain analysis.
//
// Unknowns are ordered coefficient-major: v = (v_0^T, ..., v_{m-1}^T)^T with
// v_i the n-vector multiplying Phi_i. Block (i, j) of E_hat is
//   E(mu) delta_ij + sum_l r_l E_l <Phi_i Phi_j xi_l>,
// with p_l = mu_l + r_l xi_l; A_hat likewise.

#include <complex>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "sparsepce/polychaos.hpp"
#include "sparsepce/sysmodel.hpp"

namespace sparsepce::galerkin {

using SparseMatrix = Eigen::SparseMatrix<double>;
using ComplexSparseMatrix = Eigen::SparseMatrix<std::complex<double>>;

struct GalerkinSystem {
  SparseMatrix E;  // (m n) x (m n)
  SparseMatrix A;  // (m n) x (m n)
  Eigen::VectorXd B;
  SparseMatrix C;  // m x (m n); row i is output coefficient i
  int n = 0;
  int m = 0;
  std::shared_ptr<const polychaos::BasisSet> basis;

  Eigen::Index dimension() const { return static_cast<Eigen::Index>(n) * m; }
};

/// Exact assembly from the affine structure and Legendre triple products.
GalerkinSystem assemble(const sysmodel::AffineParametricSystem& sys,
                        std::shared_ptr<const polychaos::BasisSet> basis);

/// Spectral abscissa of the pencil lambda E_hat - A_hat (dense eigensolve).
sysmodel::SpectralInfo stability(const GalerkinSystem& gsys);

/// Evaluates H_hat(s) = C_hat (s E_hat - A_hat)^{-1} B_hat. The sparsity
/// pattern of the pencil is analysed once; every evaluation is one sparse
/// LU factorization plus one solve. Not thread-safe; use one per worker.
class Resolvent {
 public:
  explicit Resolvent(const GalerkinSystem& gsys);

  /// Throws NumericalError when the factorization breaks down (s at a pole).
  Eigen::VectorXcd transfer(std::complex<double> s);

  std::uint64_t factorizations() const { return factorizations_; }

 private:
  const GalerkinSystem* gsys_;
  ComplexSparseMatrix pencil_;
  std::vector<double> e_values_;
  std::vector<double> a_values_;
  Eigen::VectorXcd rhs_;
  Eigen::SparseLU<ComplexSparseMatrix, Eigen::COLAMDOrdering<int>> lu_;
  std::uint64_t factorizations_ = 0;
};

/// Convenience one-off evaluation.
Eigen::VectorXcd galerkin_transfer(const GalerkinSystem& gsys, std::complex<double> s);

/// Log-spaced frequencies omega_min = w_1 < ... < w_nu = omega_max.
struct FrequencyGrid {
  std::vector<double> omegas;

  static FrequencyGrid log_spaced(double omega_min, double omega_max, int nu);
  std::size_t size() const { return omegas.size(); }
};

struct FrequencySweep {
  Eigen::MatrixXcd response;  // m x nu, column j is H_hat(i w_j)
  std::uint64_t factorizations = 0;
};

/// H_hat(i w_j) for every grid node, one factorization per node.
FrequencySweep sweep(const GalerkinSystem& gsys, const FrequencyGrid& grid, unsigned threads = 1);

/// Treatment of (w_max, inf) in the H2 quadrature. `truncate` drops it;
/// `asymptotic` adds w_max |H_i(i w_max)|^2, the exact tail for |H| ~ c / w,
/// which is the slowest decay a strictly proper transfer function can have.
enum class TailRule { truncate, asymptotic };

/// sqrt(Q_i / pi) with Q_i = w_1 |H_i(i w_1)|^2 + trapezoid over the grid
/// (+ the tail term).
Eigen::VectorXd h2_from_response(const FrequencyGrid& grid, const Eigen::MatrixXcd& response,
                                 TailRule tail = TailRule::asymptotic);

/// Grid maximum of |H_i(i w_j)|.
Eigen::VectorXd hinf_from_response(const Eigen::MatrixXcd& response);

struct FrequencyAnalysis {
  FrequencyGrid grid;
  Eigen::VectorXd h2;
  Eigen::VectorXd hinf;
  std::vector<int> ranking;  // positions sorted by descending h2
  double abscissa = 0.0;     // spectral abscissa of the Galerkin pencil
  std::uint64_t factorizations = 0;
};

/// Full frequency analysis given a precomputed stability result; throws
/// NumericalError if the Galerkin system is not asymptotically stable.
FrequencyAnalysis analyze(const GalerkinSystem& gsys, const FrequencyGrid& grid,
                          const sysmodel::SpectralInfo& spectral, unsigned threads = 1,
                          TailRule tail = TailRule::asymptotic);

/// Component-wise H2 norms; checks stability first.
Eigen::VectorXd h2_norms(const GalerkinSystem& gsys, double omega_min, double omega_max, int nu,
                         unsigned threads = 1, TailRule tail = TailRule::asymptotic);

/// Component-wise grid H-infinity norms.
Eigen::VectorXd hinf_norms(const GalerkinSystem& gsys, const FrequencyGrid& grid,
                           unsigned threads = 1);

/// Positions sorted by descending value, ties by ascending position.
std::vector<int> ranking(const Eigen::VectorXd& h2);

/// The q positions with the largest norms, in ranking order.
std::vector<int> optimal_index_set(const Eigen::VectorXd& h2, int q);

/// sqrt(sum_{i not in I} h2_i^2) * u_norm.
double error_bound(const Eigen::VectorXd& h2, std::span<const int> index_set, double u_norm);

/// error_bound for the optimal sets I_1, ..., I_m (entry q-1 belongs to I_q).
Eigen::VectorXd error_bound_curve(const Eigen::VectorXd& h2, double u_norm);

}  // namespace sparsepce::galerkin
