#pragma once

// Multivariate orthonormal Legendre bases of total degree, their evaluation,
// Galerkin triple products and Vandermonde matrices.
//
// Conventions: basis positions are 0-based (position 0 is the constant
// polynomial). Physical parameters p_l on [a_l, b_l] map affinely to
// xi_l in [-1, 1]; orthonormality is with respect to the uniform product
// density on [-1, 1]^n_par.

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace sparsepce::polychaos {

/// Per-variable polynomial degrees of one product basis function.
struct MultiIndex {
  std::vector<int> exponents;

  int total_degree() const;
  std::size_t size() const { return exponents.size(); }
  int operator[](std::size_t l) const { return exponents[l]; }
  auto operator<=>(const MultiIndex&) const = default;
};

struct Interval {
  double lower = -1.0;
  double upper = 1.0;

  double center() const { return 0.5 * (lower + upper); }
  double half_width() const { return 0.5 * (upper - lower); }
  bool contains(double x) const { return x >= lower && x <= upper; }
};

/// Independent uniform parameters, p_l ~ U[mu_l (1 - delta), mu_l (1 + delta)].
struct UniformDistribution {
  std::vector<double> means;
  double delta = 0.05;

  UniformDistribution() = default;
  UniformDistribution(std::vector<double> means, double delta);

  std::size_t size() const { return means.size(); }
  Interval interval(std::size_t l) const;
  std::vector<Interval> domain() const;
};

/// Number of total-degree-<=d polynomials in n_par variables,
/// (n_par + d)! / (n_par! d!). Throws std::invalid_argument on bad input or
/// when the count does not fit the basis index type (int).
std::size_t basis_cardinality(int n_par, int degree);

/// All multi-indices of total degree <= d, graded by total degree. Within a
/// degree the order is lexicographic with the first variable most
/// significant and larger exponents first, so the degree-one block is
/// xi_1, xi_2, ..., xi_n and the degree-two block starts xi_1^2, xi_1 xi_2.
std::vector<MultiIndex> multi_index_set(int n_par, int degree);

/// beta_k = k / sqrt(4k^2 - 1): xi phi_k = beta_{k+1} phi_{k+1} + beta_k phi_{k-1}
/// for Legendre polynomials orthonormal under density 1/2 on [-1, 1].
double recurrence_coefficient(int k);

/// Orthonormal Legendre polynomials phi_0..phi_max_degree at xi.
Eigen::VectorXd legendre_values(int max_degree, double xi);

/// Single orthonormal Legendre polynomial phi_degree(xi).
double legendre(int degree, double xi);

class BasisSet {
 public:
  BasisSet(int n_par, int degree, std::vector<Interval> domain);

  /// Basis over the support of `dist`.
  static BasisSet for_distribution(const UniformDistribution& dist, int degree);

  int num_params() const { return n_par_; }
  int degree() const { return degree_; }
  int size() const { return static_cast<int>(indices_.size()); }
  const MultiIndex& index(int i) const { return indices_.at(static_cast<std::size_t>(i)); }
  const std::vector<MultiIndex>& indices() const { return indices_; }
  int total_degree(int i) const { return index(i).total_degree(); }
  const std::vector<Interval>& domain() const { return domain_; }

  /// Position of a multi-index, or -1 if it is not part of the basis.
  int position(const MultiIndex& alpha) const;

  /// Position of the degree-one polynomial in variable l.
  int unit_position(int l) const;

  /// Affine map of physical p_l onto [-1, 1].
  double standardize(int l, double p) const;

  /// Phi_0(p), ..., Phi_{m-1}(p). Points outside the domain are evaluated
  /// by polynomial extension and reported once through the log.
  Eigen::VectorXd evaluate(std::span<const double> p) const;

  /// <Phi_i Phi_j xi_l> under the product density.
  double triple_product(int i, int j, int l) const;

  struct Coupling {
    int row;
    int col;
    double value;
  };
  /// All nonzero <Phi_i Phi_j xi_l> for variable l, both (i,j) and (j,i).
  std::vector<Coupling> couplings(int l) const;

  /// k x m matrix with entry (i,j) = Phi_j(sample_i); samples is k x n_par.
  Eigen::MatrixXd vandermonde(const Eigen::MatrixXd& samples) const;

 private:
  int n_par_;
  int degree_;
  std::vector<Interval> domain_;
  std::vector<MultiIndex> indices_;
};

/// Columns of V in the order listed. Rejects duplicates and out-of-range
/// positions.
Eigen::MatrixXd column_subset(const Eigen::MatrixXd& V, std::span<const int> columns);

}  // namespace sparsepce::polychaos
