#pragma once

// Affine-parametric SISO linear systems
//   E(p) x' = A(p) x + B(p) u,   y = C(p) x,
// with E(p) = E_0 + sum_l p_l E_l (likewise A, and optionally B and C).

#include <array>
#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sparsepce/polychaos.hpp"

namespace sparsepce::sysmodel {

/// One deterministic SISO instance.
struct StateSpace {
  Eigen::MatrixXd E;
  Eigen::MatrixXd A;
  Eigen::VectorXd B;
  Eigen::RowVectorXd C;

  Eigen::Index order() const { return A.rows(); }
};

struct SpectralInfo {
  double abscissa = 0.0;
  std::vector<std::complex<double>> eigenvalues;

  bool stable() const { return abscissa < 0.0; }
};

class AffineParametricSystem {
 public:
  /// E_terms and A_terms hold the constant term followed by one coefficient
  /// matrix per parameter (n_par + 1 entries each).
  AffineParametricSystem(std::vector<Eigen::MatrixXd> E_terms, std::vector<Eigen::MatrixXd> A_terms,
                         Eigen::VectorXd B, Eigen::RowVectorXd C,
                         polychaos::UniformDistribution dist);

  /// Optional parameter dependence of B and C (constant term + one per
  /// parameter). Empty lists keep B and C constant.
  void set_input_terms(std::vector<Eigen::VectorXd> B_terms);
  void set_output_terms(std::vector<Eigen::RowVectorXd> C_terms);

  int order() const { return static_cast<int>(E_terms_.front().rows()); }
  int num_params() const { return static_cast<int>(E_terms_.size()) - 1; }

  const std::vector<Eigen::MatrixXd>& E_terms() const { return E_terms_; }
  const std::vector<Eigen::MatrixXd>& A_terms() const { return A_terms_; }
  /// Constant term first; size 1 when B does not depend on p.
  const std::vector<Eigen::VectorXd>& B_terms() const { return B_terms_; }
  const std::vector<Eigen::RowVectorXd>& C_terms() const { return C_terms_; }
  const polychaos::UniformDistribution& distribution() const { return dist_; }
  void set_distribution(polychaos::UniformDistribution dist);

  StateSpace instantiate(std::span<const double> p) const;
  StateSpace at_mean() const { return instantiate(dist_.means); }

 private:
  std::vector<Eigen::MatrixXd> E_terms_;
  std::vector<Eigen::MatrixXd> A_terms_;
  std::vector<Eigen::VectorXd> B_terms_;
  std::vector<Eigen::RowVectorXd> C_terms_;
  polychaos::UniformDistribution dist_;
};

/// H(s) = C (sE - A)^{-1} B from one LU factorization and one solve.
/// Throws NumericalError when sE - A is singular to working precision.
std::complex<double> transfer_eval(const StateSpace& sys, std::complex<double> s);

/// Eigenvalues of the pencil lambda E - A via E^{-1} A.
SpectralInfo spectral_abscissa(const Eigen::MatrixXd& E, const Eigen::MatrixXd& A);

/// Eigenvalues of a dense square matrix (LAPACK dgeev, no eigenvectors).
SpectralInfo spectrum(Eigen::MatrixXd M);

/// Means of the 14 benchmark parameters, in parameter order:
/// masses m1..m4, chain springs k1..k4 (ground-m1, m1-m2, m2-m3, m3-m4),
/// skip springs k5 (m1-m3) and k6 (m2-m4), dampers c1..c4 on the chain links.
struct MassSpringDamperMeans {
  std::array<double, 4> masses{1.0, 1.0, 1.0, 1.0};
  std::array<double, 4> chain_springs{2.0, 2.0, 2.0, 2.0};
  std::array<double, 2> skip_springs{1.0, 1.0};
  std::array<double, 4> dampers{0.3, 0.3, 0.3, 0.3};

  std::array<double, 14> as_array() const;
  static MassSpringDamperMeans from_array(std::span<const double> values);
};

inline constexpr int kMassSpringDamperParams = 14;

/// Four masses in a chain above ground with force input on the bottom mass
/// m1 and the position of the top mass m4 as output. State (q, q'), n = 8:
///   E = [I 0; 0 M],  A = [0 I; -K -D],  B = (0, e_1),  C = (e_4, 0).
AffineParametricSystem build_mass_spring_damper(const MassSpringDamperMeans& means, double delta);
AffineParametricSystem build_mass_spring_damper(std::span<const double> means, double delta);

}  // namespace sparsepce::sysmodel
