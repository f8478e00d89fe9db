#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace sparsepce::sparsesel {

/// Householder QR of a tall matrix that grows by appending columns.
///
/// After q appends, Q^T [a_1 ... a_q] = [R; 0] with R upper triangular q x q
/// and Q = H_1 ... H_q. Appending column a applies H_q ... H_1 to a and
/// builds one new reflector from the trailing part, O(k q) work, so the
/// factorization of V_{I_q} is obtained from that of V_{I_{q-1}} without
/// refactoring.
class IncrementalQR {
 public:
  explicit IncrementalQR(Eigen::Index rows, Eigen::Index max_cols = 0);

  /// Appends a column. Returns false, leaving the factorization unchanged,
  /// if the new diagonal entry of R would be <= tolerance (column in the
  /// span of the current ones).
  bool append(const Eigen::VectorXd& column, double tolerance = 0.0);

  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }

  /// Applies the most recently added reflector H_q to x (in place). Keeps a
  /// running Q^T y current after every append.
  void apply_last_reflector(Eigen::Ref<Eigen::MatrixXd> x) const;

  /// x <- Q^T x using all current reflectors.
  void apply_qt(Eigen::Ref<Eigen::MatrixXd> x) const;

  /// x <- Q x using all current reflectors.
  void apply_q(Eigen::Ref<Eigen::MatrixXd> x) const;

  /// Solves R c = z.head(q) for the current q.
  Eigen::VectorXd solve_r(const Eigen::Ref<const Eigen::VectorXd>& qt_rhs) const;

  /// Upper-left q x q block of R.
  Eigen::MatrixXd r() const;

  double diagonal(Eigen::Index j) const { return r_(j, j); }

 private:
  void apply_reflector(Eigen::Index j, Eigen::Ref<Eigen::MatrixXd> x) const;

  Eigen::Index rows_;
  Eigen::Index cols_ = 0;
  Eigen::MatrixXd reflectors_;  // column j holds v_j (unit leading entry implied at row j)
  Eigen::VectorXd tau_;
  Eigen::MatrixXd r_;
};

}  // namespace sparsepce::sparsesel
