#include "sparsepce/sparsesel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <spdlog/spdlog.h>

#include "sparsepce/errors.hpp"
#include "sparsepce/parallel.hpp"

namespace sparsepce::sparsesel {

namespace {

constexpr double kResidualStop = 1e-13;
constexpr double kDependence = 1e-12;

}  // namespace

std::string_view to_string(Method method) { return method == Method::omp ? "omp" : "lsq"; }

Eigen::VectorXd SparseSolution::embedded(Eigen::Index t, int m) const {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
  const auto& set = index_set(t);
  for (std::size_t j = 0; j < set.size(); ++j)
    w[set[j]] = coefficients(static_cast<Eigen::Index>(j), t);
  return w;
}

Omp::Omp(const Eigen::MatrixXd& V) : V_(&V) {
  if (V.rows() < 1 || V.cols() < 1) throw std::invalid_argument("omp: empty matrix");
  const Eigen::VectorXd norms = V.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < norms.size(); ++j)
    if (!(norms[j] > 0.0))
      throw std::invalid_argument("omp: column " + std::to_string(j) + " of V is zero");
  inv_norms_ = norms.cwiseInverse();
  dependence_tolerance_ = kDependence * V.norm();
}

OmpPath Omp::path(const Eigen::VectorXd& y, int q_max) const {
  const Eigen::MatrixXd& V = *V_;
  const Eigen::Index k = V.rows();
  const Eigen::Index m = V.cols();
  if (y.size() != k) throw std::invalid_argument("omp: y has the wrong length");
  if (q_max < 1 || q_max > std::min(k, m))
    throw std::invalid_argument("omp: q_max must lie in [1, min(k, m)]");

  OmpPath out;
  out.selection.reserve(static_cast<std::size_t>(q_max));
  out.coefficients.reserve(static_cast<std::size_t>(q_max));
  out.residuals.reserve(static_cast<std::size_t>(q_max));

  const double y_norm = y.norm();
  IncrementalQR qr(k, q_max);
  Eigen::MatrixXd qty = y;  // Q^T y, kept current after every append
  Eigen::VectorXd residual = y;
  std::vector<char> active(static_cast<std::size_t>(m), 0);
  Eigen::VectorXd correlation(m);
  Eigen::MatrixXd scratch(k, 1);

  for (int q = 1; q <= q_max; ++q) {
    correlation.noalias() = V.transpose() * residual;
    Eigen::Index best = -1;
    double best_value = -1.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (active[static_cast<std::size_t>(j)]) continue;
      const double c = std::abs(correlation[j]) * inv_norms_[j];
      if (c > best_value) {
        best_value = c;
        best = j;
      }
    }
    if (!qr.append(V.col(best), dependence_tolerance_)) {
      out.stop = OmpPath::Stop::dependent_column;
      break;
    }
    active[static_cast<std::size_t>(best)] = 1;
    out.selection.push_back(static_cast<int>(best));
    qr.apply_last_reflector(qty);
    out.coefficients.push_back(qr.solve_r(qty.col(0)));

    // r = y - V_I w = Q [0; (Q^T y)_{q:}]
    scratch = qty;
    scratch.topRows(q).setZero();
    const double r_norm = scratch.col(0).norm();
    out.residuals.push_back(r_norm);
    if (r_norm < kResidualStop * y_norm) {
      out.stop = q < q_max ? OmpPath::Stop::residual_vanished : OmpPath::Stop::reached_q_max;
      break;
    }
    if (q < q_max) {
      qr.apply_q(scratch);
      residual = scratch.col(0);
    }
  }
  return out;
}

OmpPath omp(const Eigen::MatrixXd& V, const Eigen::VectorXd& y, int q_max) {
  return Omp(V).path(y, q_max);
}

std::vector<SparseSolution> omp_over_time(const Eigen::MatrixXd& V, const Eigen::MatrixXd& Y,
                                          int q_max, unsigned threads) {
  if (Y.rows() != V.rows()) throw std::invalid_argument("omp_over_time: Y and V row mismatch");
  const Omp solver(V);
  const auto r = static_cast<std::size_t>(Y.cols());
  std::vector<OmpPath> paths(r);
  parallel_for(r, threads, [&](std::size_t t) {
    paths[t] = solver.path(Y.col(static_cast<Eigen::Index>(t)), q_max);
  });

  std::size_t truncated = 0;
  for (const auto& p : paths)
    if (p.achieved() < q_max) ++truncated;
  if (truncated > 0)
    spdlog::info("omp: {} of {} time points terminated before q = {}", truncated, r, q_max);

  std::vector<SparseSolution> out(static_cast<std::size_t>(q_max));
  for (int q = 1; q <= q_max; ++q) {
    SparseSolution& s = out[static_cast<std::size_t>(q - 1)];
    s.method = Method::omp;
    s.q = q;
    s.index_sets.resize(r);
    s.coefficients = Eigen::MatrixXd::Zero(q, static_cast<Eigen::Index>(r));
    s.residuals.resize(static_cast<Eigen::Index>(r));
    for (std::size_t t = 0; t < r; ++t) {
      const OmpPath& p = paths[t];
      const auto ti = static_cast<Eigen::Index>(t);
      // Early termination: the last achieved solution stands for larger q.
      const int used = std::min(q, p.achieved());
      s.index_sets[t].assign(p.selection.begin(), p.selection.begin() + used);
      if (used > 0) {
        s.coefficients.col(ti).head(used) = p.coefficients[static_cast<std::size_t>(used - 1)];
        s.residuals[ti] = p.residuals[static_cast<std::size_t>(used - 1)];
      } else {
        s.residuals[ti] = Y.col(ti).norm();
      }
    }
  }
  return out;
}

std::vector<SparseSolution> lsq_fixed_basis(const Eigen::MatrixXd& V, std::span<const int> order,
                                            const Eigen::MatrixXd& Y, int q_max, LsqWork* work) {
  const Eigen::Index k = V.rows();
  if (Y.rows() != k) throw std::invalid_argument("lsq_fixed_basis: Y and V row mismatch");
  if (q_max < 1 || q_max >= k)
    throw std::invalid_argument("lsq_fixed_basis: q_max must lie in [1, k)");
  if (order.size() < static_cast<std::size_t>(q_max))
    throw std::invalid_argument("lsq_fixed_basis: fewer indices than q_max");
  std::vector<char> seen(static_cast<std::size_t>(V.cols()), 0);
  for (int q = 0; q < q_max; ++q) {
    const int j = order[static_cast<std::size_t>(q)];
    if (j < 0 || j >= V.cols())
      throw std::out_of_range("lsq_fixed_basis: index " + std::to_string(j) + " out of range");
    if (seen[static_cast<std::size_t>(j)])
      throw std::invalid_argument("lsq_fixed_basis: duplicate index " + std::to_string(j));
    seen[static_cast<std::size_t>(j)] = 1;
  }

  const double tolerance = kDependence * V.norm();
  IncrementalQR qr(k, q_max);
  Eigen::MatrixXd Z = Y;  // Q^T Y
  LsqWork counts;
  std::vector<SparseSolution> out(static_cast<std::size_t>(q_max));
  std::vector<int> set;
  for (int q = 1; q <= q_max; ++q) {
    const int j = order[static_cast<std::size_t>(q - 1)];
    if (!qr.append(V.col(j), tolerance))
      throw NumericalError("lsq_fixed_basis: V_I is rank deficient at q = " + std::to_string(q));
    ++counts.factorization_updates;
    qr.apply_last_reflector(Z);
    set.push_back(j);

    SparseSolution& s = out[static_cast<std::size_t>(q - 1)];
    s.method = Method::lsq;
    s.q = q;
    s.index_sets = {set};
    const Eigen::MatrixXd R = qr.r();
    s.coefficients = R.triangularView<Eigen::Upper>().solve(Z.topRows(q));
    counts.triangular_solves += static_cast<std::uint64_t>(Y.cols());
    s.residuals = Z.bottomRows(k - q).colwise().norm().transpose();
  }
  if (work) *work = counts;
  return out;
}

double residual_norm(const Eigen::MatrixXd& V, const Eigen::VectorXd& w, const Eigen::VectorXd& y) {
  if (V.cols() != w.size() || V.rows() != y.size())
    throw std::invalid_argument("residual_norm: shape mismatch");
  return (V * w - y).norm();
}

double l2_estimate(double residual, Eigen::Index k) {
  if (k < 1) throw std::invalid_argument("l2_estimate: k must be >= 1");
  return residual / std::sqrt(static_cast<double>(k));
}

std::optional<double> l2_relative_error(const Eigen::VectorXd& reference,
                                        const Eigen::VectorXd& approx) {
  if (reference.size() != approx.size())
    throw std::invalid_argument("l2_relative_error: length mismatch");
  const double ref = reference.norm();
  if (!(ref > 0.0)) return std::nullopt;
  return (reference - approx).norm() / ref;
}

double intersection_ratio(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("intersection_ratio: sets differ in size (" +
                                std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  if (a.empty()) throw std::invalid_argument("intersection_ratio: empty sets");
  std::vector<int> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  std::vector<int> common;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(common));
  return static_cast<double>(common.size()) / static_cast<double>(a.size());
}

std::vector<double> degree_ratios(std::span<const int> index_set, const polychaos::BasisSet& basis) {
  std::vector<double> ratios(static_cast<std::size_t>(basis.degree()) + 1, 0.0);
  if (index_set.empty()) return ratios;
  for (int i : index_set) ratios[static_cast<std::size_t>(basis.total_degree(i))] += 1.0;
  for (double& r : ratios) r /= static_cast<double>(index_set.size());
  return ratios;
}

double condition_number(const Eigen::MatrixXd& VI) {
  if (VI.size() == 0) throw std::invalid_argument("condition_number: empty matrix");
  const Eigen::BDCSVD<Eigen::MatrixXd> svd(VI);
  const Eigen::VectorXd& sigma = svd.singularValues();
  const double smax = sigma[0];
  if (!(smax > 0.0)) throw std::invalid_argument("condition_number: zero matrix");
  const double smin = sigma[sigma.size() - 1];
  const double cutoff = smax * std::numeric_limits<double>::epsilon() *
                        static_cast<double>(std::max(VI.rows(), VI.cols()));
  if (VI.cols() > VI.rows() || smin <= cutoff) return std::numeric_limits<double>::infinity();
  return smax / smin;
}

ComparisonReport compare(const polychaos::BasisSet& basis, const Eigen::MatrixXd& V,
                         const Eigen::MatrixXd& reference,
                         const std::vector<SparseSolution>& lsq,
                         const std::vector<SparseSolution>& omp) {
  if (lsq.size() != omp.size()) throw std::invalid_argument("compare: method q ranges differ");
  const int m = basis.size();
  if (reference.rows() != m || V.cols() != m)
    throw std::invalid_argument("compare: reference or V does not match the basis");
  const Eigen::Index r = reference.cols();

  ComparisonReport report;
  report.degree = basis.degree();
  std::vector<char> defined(static_cast<std::size_t>(r), 1);
  for (Eigen::Index t = 0; t < r; ++t) {
    if (!(reference.col(t).norm() > 0.0)) {
      defined[static_cast<std::size_t>(t)] = 0;
      ++report.excluded_points;
    }
  }
  if (report.excluded_points > 0)
    spdlog::warn("compare: {} time points have a zero reference and are excluded from L2 means",
                 report.excluded_points);
  const auto n_defined = static_cast<double>(r) - static_cast<double>(report.excluded_points);

  for (std::size_t qi = 0; qi < lsq.size(); ++qi) {
    const SparseSolution& a = lsq[qi];
    const SparseSolution& b = omp[qi];
    if (a.q != b.q || a.time_points() != r || b.time_points() != r)
      throw std::invalid_argument("compare: solutions do not match the reference");
    ComparisonRow row;
    row.q = a.q;
    row.ratios_lsq = degree_ratios(a.index_set(0), basis);
    row.ratios_omp.assign(row.ratios_lsq.size(), 0.0);
    row.condition = condition_number(polychaos::column_subset(V, a.index_set(0)));

    // Accumulate in time order so the means do not depend on threading.
    for (Eigen::Index t = 0; t < r; ++t) {
      if (defined[static_cast<std::size_t>(t)]) {
        row.l2_lsq += *l2_relative_error(reference.col(t), a.embedded(t, m));
        row.l2_omp += *l2_relative_error(reference.col(t), b.embedded(t, m));
      }
      row.residual_lsq += a.residuals[t];
      row.residual_omp += b.residuals[t];
      const auto& set_a = a.index_set(t);
      const auto& set_b = b.index_set(t);
      if (set_a.size() == set_b.size()) {
        row.theta += intersection_ratio(set_a, set_b);
      } else {
        // Truncated OMP path: count the shared indices against q.
        std::vector<int> sa(set_a), sb(set_b), common;
        std::sort(sa.begin(), sa.end());
        std::sort(sb.begin(), sb.end());
        std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(common));
        row.theta += static_cast<double>(common.size()) / row.q;
      }
      const auto ratios = degree_ratios(set_b, basis);
      for (std::size_t d = 0; d < ratios.size(); ++d) row.ratios_omp[d] += ratios[d];
    }
    const auto rr = static_cast<double>(r);
    if (n_defined > 0) {
      row.l2_lsq /= n_defined;
      row.l2_omp /= n_defined;
    } else {
      row.l2_lsq = row.l2_omp = std::numeric_limits<double>::quiet_NaN();
    }
    row.residual_lsq /= rr;
    row.residual_omp /= rr;
    row.theta /= rr;
    for (double& v : row.ratios_omp) v /= rr;
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace sparsepce::sparsesel
