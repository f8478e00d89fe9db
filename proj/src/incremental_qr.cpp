#include "sparsepce/incremental_qr.hpp"

#include <cmath>
#include <stdexcept>

namespace sparsepce::sparsesel {

IncrementalQR::IncrementalQR(Eigen::Index rows, Eigen::Index max_cols) : rows_(rows) {
  if (rows < 1) throw std::invalid_argument("IncrementalQR: needs at least one row");
  const Eigen::Index reserve = std::min(rows, max_cols > 0 ? max_cols : Eigen::Index{16});
  reflectors_.setZero(rows, reserve);
  tau_.setZero(reserve);
  r_.setZero(reserve, reserve);
}

void IncrementalQR::apply_reflector(Eigen::Index j, Eigen::Ref<Eigen::MatrixXd> x) const {
  const double tau = tau_[j];
  if (tau == 0.0) return;
  const Eigen::Index len = rows_ - j;
  const auto v = reflectors_.col(j).tail(len);
  auto block = x.bottomRows(len);
  const Eigen::RowVectorXd w = v.transpose() * block;
  block.noalias() -= (tau * v) * w;
}

void IncrementalQR::apply_last_reflector(Eigen::Ref<Eigen::MatrixXd> x) const {
  if (cols_ == 0) return;
  apply_reflector(cols_ - 1, x);
}

void IncrementalQR::apply_qt(Eigen::Ref<Eigen::MatrixXd> x) const {
  if (x.rows() != rows_) throw std::invalid_argument("IncrementalQR::apply_qt: row mismatch");
  for (Eigen::Index j = 0; j < cols_; ++j) apply_reflector(j, x);
}

void IncrementalQR::apply_q(Eigen::Ref<Eigen::MatrixXd> x) const {
  if (x.rows() != rows_) throw std::invalid_argument("IncrementalQR::apply_q: row mismatch");
  for (Eigen::Index j = cols_ - 1; j >= 0; --j) apply_reflector(j, x);
}

bool IncrementalQR::append(const Eigen::VectorXd& column, double tolerance) {
  if (column.size() != rows_) throw std::invalid_argument("IncrementalQR::append: length mismatch");
  if (cols_ >= rows_) return false;

  Eigen::MatrixXd w = column;
  apply_qt(w);

  const Eigen::Index q = cols_;
  const Eigen::Index len = rows_ - q;
  const double alpha = w(q, 0);
  const double sigma = len > 1 ? w.col(0).tail(len - 1).squaredNorm() : 0.0;
  const double norm = std::sqrt(alpha * alpha + sigma);
  if (!(norm > tolerance)) return false;

  if (q >= reflectors_.cols()) {
    const Eigen::Index grown = std::min(rows_, std::max<Eigen::Index>(2 * reflectors_.cols(), q + 1));
    reflectors_.conservativeResize(Eigen::NoChange, grown);
    tau_.conservativeResize(grown);
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(grown, grown);
    r.topLeftCorner(r_.rows(), r_.cols()) = r_;
    r_.swap(r);
  }

  reflectors_.col(q).setZero();
  double beta;
  if (sigma == 0.0) {
    // Already triangular in this column; identity reflector.
    tau_[q] = 0.0;
    beta = alpha;
    reflectors_(q, q) = 1.0;
  } else {
    beta = alpha >= 0.0 ? -norm : norm;
    tau_[q] = (beta - alpha) / beta;
    reflectors_(q, q) = 1.0;
    reflectors_.col(q).tail(len - 1) = w.col(0).tail(len - 1) / (alpha - beta);
  }
  r_.col(q).head(q) = w.col(0).head(q);
  r_(q, q) = beta;
  ++cols_;
  return true;
}

Eigen::VectorXd IncrementalQR::solve_r(const Eigen::Ref<const Eigen::VectorXd>& qt_rhs) const {
  if (qt_rhs.size() < cols_) throw std::invalid_argument("IncrementalQR::solve_r: rhs too short");
  return r_.topLeftCorner(cols_, cols_).triangularView<Eigen::Upper>().solve(qt_rhs.head(cols_));
}

Eigen::MatrixXd IncrementalQR::r() const { return r_.topLeftCorner(cols_, cols_); }

}  // namespace sparsepce::sparsesel
