#include "sparsepce/galerkin.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

#include "sparsepce/errors.hpp"
#include "sparsepce/parallel.hpp"

namespace sparsepce::galerkin {

namespace {

using Triplet = Eigen::Triplet<double>;

// Adds coefficient * M into block (bi, bj) for every nonzero of M.
template <typename Dense>
void add_block(std::vector<Triplet>& out, const Dense& M, Eigen::Index row0, Eigen::Index col0,
               double coefficient) {
  if (coefficient == 0.0) return;
  for (Eigen::Index c = 0; c < M.cols(); ++c)
    for (Eigen::Index r = 0; r < M.rows(); ++r)
      if (M(r, c) != 0.0) out.emplace_back(row0 + r, col0 + c, coefficient * M(r, c));
}

bool is_zero(const Eigen::MatrixXd& M) { return (M.array() == 0.0).all(); }

}  // namespace

GalerkinSystem assemble(const sysmodel::AffineParametricSystem& sys,
                        std::shared_ptr<const polychaos::BasisSet> basis) {
  if (!basis) throw std::invalid_argument("assemble: missing basis");
  const auto& dist = sys.distribution();
  const int n_par = sys.num_params();
  if (basis->num_params() != n_par)
    throw std::invalid_argument("assemble: basis has " + std::to_string(basis->num_params()) +
                                " variables, system has " + std::to_string(n_par) + " parameters");
  if (dist.delta > 0.0) {
    for (int l = 0; l < n_par; ++l) {
      const auto expect = dist.interval(static_cast<std::size_t>(l));
      const auto have = basis->domain()[static_cast<std::size_t>(l)];
      const double scale = std::max(std::abs(expect.lower), std::abs(expect.upper));
      if (std::abs(expect.lower - have.lower) > 1e-12 * scale ||
          std::abs(expect.upper - have.upper) > 1e-12 * scale)
        throw std::invalid_argument("assemble: basis domain of variable " + std::to_string(l) +
                                    " does not match the parameter distribution");
    }
  }

  const int n = sys.order();
  const int m = basis->size();
  const Eigen::Index dim = static_cast<Eigen::Index>(n) * m;

  std::vector<double> half_width(static_cast<std::size_t>(n_par));
  for (int l = 0; l < n_par; ++l)
    half_width[static_cast<std::size_t>(l)] = dist.delta * std::abs(dist.means[static_cast<std::size_t>(l)]);

  const sysmodel::StateSpace mean = sys.at_mean();

  std::vector<Triplet> e_trip, a_trip, c_trip;
  for (int i = 0; i < m; ++i) {
    const Eigen::Index off = static_cast<Eigen::Index>(i) * n;
    add_block(e_trip, mean.E, off, off, 1.0);
    add_block(a_trip, mean.A, off, off, 1.0);
    add_block(c_trip, mean.C, i, off, 1.0);
  }

  Eigen::VectorXd B = Eigen::VectorXd::Zero(dim);
  B.head(n) = mean.B;

  const bool affine_b = sys.B_terms().size() > 1;
  const bool affine_c = sys.C_terms().size() > 1;
  for (int l = 0; l < n_par; ++l) {
    const double r = half_width[static_cast<std::size_t>(l)];
    if (r == 0.0 || basis->degree() == 0) continue;
    const auto& El = sys.E_terms()[static_cast<std::size_t>(l) + 1];
    const auto& Al = sys.A_terms()[static_cast<std::size_t>(l) + 1];
    const bool e_active = !is_zero(El);
    const bool a_active = !is_zero(Al);
    const bool c_active = affine_c && !is_zero(sys.C_terms()[static_cast<std::size_t>(l) + 1]);
    if (e_active || a_active || c_active) {
      for (const auto& cp : basis->couplings(l)) {
        const Eigen::Index row0 = static_cast<Eigen::Index>(cp.row) * n;
        const Eigen::Index col0 = static_cast<Eigen::Index>(cp.col) * n;
        if (e_active) add_block(e_trip, El, row0, col0, r * cp.value);
        if (a_active) add_block(a_trip, Al, row0, col0, r * cp.value);
        if (c_active)
          add_block(c_trip, sys.C_terms()[static_cast<std::size_t>(l) + 1], cp.row, col0, r * cp.value);
      }
    }
    if (affine_b) {
      // <Phi_i xi_l> is beta_1 for the degree-one polynomial in xi_l, else 0.
      const Eigen::Index off = static_cast<Eigen::Index>(basis->unit_position(l)) * n;
      B.segment(off, n) += r * polychaos::recurrence_coefficient(1) *
                           sys.B_terms()[static_cast<std::size_t>(l) + 1];
    }
  }

  GalerkinSystem g;
  g.n = n;
  g.m = m;
  g.basis = std::move(basis);
  g.E.resize(dim, dim);
  g.A.resize(dim, dim);
  g.C.resize(m, dim);
  g.E.setFromTriplets(e_trip.begin(), e_trip.end());
  g.A.setFromTriplets(a_trip.begin(), a_trip.end());
  g.C.setFromTriplets(c_trip.begin(), c_trip.end());
  g.E.makeCompressed();
  g.A.makeCompressed();
  g.C.makeCompressed();
  g.B = std::move(B);
  return g;
}

sysmodel::SpectralInfo stability(const GalerkinSystem& gsys) {
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(gsys.E);
  if (lu.info() != Eigen::Success)
    throw NumericalError("stability: Galerkin mass matrix is singular");
  Eigen::MatrixXd M = lu.solve(Eigen::MatrixXd(gsys.A));
  if (!M.allFinite()) throw NumericalError("stability: Galerkin mass matrix is singular");
  return sysmodel::spectrum(std::move(M));
}

Resolvent::Resolvent(const GalerkinSystem& gsys) : gsys_(&gsys) {
  const Eigen::Index dim = gsys.dimension();
  // Union pattern of E_hat and A_hat; values are refilled per frequency.
  std::vector<Eigen::Triplet<std::complex<double>>> pattern;
  pattern.reserve(static_cast<std::size_t>(gsys.E.nonZeros() + gsys.A.nonZeros()));
  for (const SparseMatrix* M : {&gsys.E, &gsys.A})
    for (Eigen::Index c = 0; c < M->outerSize(); ++c)
      for (SparseMatrix::InnerIterator it(*M, c); it; ++it)
        pattern.emplace_back(it.row(), it.col(), 1.0);
  pencil_.resize(dim, dim);
  pencil_.setFromTriplets(pattern.begin(), pattern.end());
  pencil_.makeCompressed();

  const auto nnz = static_cast<std::size_t>(pencil_.nonZeros());
  e_values_.assign(nnz, 0.0);
  a_values_.assign(nnz, 0.0);
  for (Eigen::Index c = 0; c < pencil_.outerSize(); ++c) {
    for (ComplexSparseMatrix::InnerIterator it(pencil_, c); it; ++it) {
      const auto k = static_cast<std::size_t>(&it.valueRef() - pencil_.valuePtr());
      e_values_[k] = gsys.E.coeff(it.row(), it.col());
      a_values_[k] = gsys.A.coeff(it.row(), it.col());
    }
  }
  rhs_ = gsys.B.cast<std::complex<double>>();
  lu_.analyzePattern(pencil_);
}

Eigen::VectorXcd Resolvent::transfer(std::complex<double> s) {
  std::complex<double>* values = pencil_.valuePtr();
  for (std::size_t k = 0; k < e_values_.size(); ++k) values[k] = s * e_values_[k] - a_values_[k];
  lu_.factorize(pencil_);
  ++factorizations_;
  if (lu_.info() != Eigen::Success)
    throw NumericalError("galerkin_transfer: sE - A is singular at s = (" +
                         std::to_string(s.real()) + ", " + std::to_string(s.imag()) +
                         "); s is at or near a pole");
  const Eigen::VectorXcd x = lu_.solve(rhs_);
  Eigen::VectorXcd out = gsys_->C.cast<std::complex<double>>() * x;
  if (!out.allFinite())
    throw NumericalError("galerkin_transfer: non-finite response; s is at or near a pole");
  return out;
}

Eigen::VectorXcd galerkin_transfer(const GalerkinSystem& gsys, std::complex<double> s) {
  Resolvent resolvent(gsys);
  return resolvent.transfer(s);
}

FrequencyGrid FrequencyGrid::log_spaced(double omega_min, double omega_max, int nu) {
  if (!(omega_min > 0.0) || !(omega_max > omega_min) || !std::isfinite(omega_max))
    throw std::invalid_argument("frequency grid needs 0 < omega_min < omega_max");
  if (nu < 2) throw std::invalid_argument("frequency grid needs at least 2 points");
  FrequencyGrid g;
  g.omegas.resize(static_cast<std::size_t>(nu));
  const double lo = std::log(omega_min);
  const double hi = std::log(omega_max);
  for (int j = 0; j < nu; ++j)
    g.omegas[static_cast<std::size_t>(j)] = std::exp(lo + (hi - lo) * j / (nu - 1));
  g.omegas.front() = omega_min;
  g.omegas.back() = omega_max;
  return g;
}

FrequencySweep sweep(const GalerkinSystem& gsys, const FrequencyGrid& grid, unsigned threads) {
  if (grid.size() < 2) throw std::invalid_argument("sweep: frequency grid needs at least 2 points");
  for (std::size_t j = 0; j < grid.size(); ++j) {
    if (!(grid.omegas[j] > 0.0) || (j > 0 && !(grid.omegas[j] > grid.omegas[j - 1])))
      throw std::invalid_argument("sweep: frequencies must be positive and increasing");
  }
  FrequencySweep out;
  out.response.resize(gsys.m, static_cast<Eigen::Index>(grid.size()));
  const std::size_t workers = worker_count(grid.size(), threads);
  std::vector<std::uint64_t> counts(workers, 0);
  parallel_ranges(grid.size(), threads, [&](std::size_t w, std::size_t begin, std::size_t end) {
    Resolvent resolvent(gsys);
    for (std::size_t j = begin; j < end; ++j)
      out.response.col(static_cast<Eigen::Index>(j)) =
          resolvent.transfer(std::complex<double>(0.0, grid.omegas[j]));
    counts[w] = resolvent.factorizations();
  });
  out.factorizations = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
  return out;
}

Eigen::VectorXd h2_from_response(const FrequencyGrid& grid, const Eigen::MatrixXcd& response,
                                 TailRule tail) {
  if (static_cast<std::size_t>(response.cols()) != grid.size() || grid.size() < 2)
    throw std::invalid_argument("h2_from_response: response does not match the grid");
  const Eigen::MatrixXd power = response.cwiseAbs2();
  Eigen::VectorXd integral = grid.omegas[0] * power.col(0);
  for (std::size_t j = 1; j < grid.size(); ++j) {
    const double half_step = 0.5 * (grid.omegas[j] - grid.omegas[j - 1]);
    integral += half_step * (power.col(static_cast<Eigen::Index>(j) - 1) +
                             power.col(static_cast<Eigen::Index>(j)));
  }
  if (tail == TailRule::asymptotic) integral += grid.omegas.back() * power.col(power.cols() - 1);
  return (integral / std::numbers::pi).cwiseSqrt();
}

Eigen::VectorXd hinf_from_response(const Eigen::MatrixXcd& response) {
  return response.cwiseAbs().rowwise().maxCoeff();
}

FrequencyAnalysis analyze(const GalerkinSystem& gsys, const FrequencyGrid& grid,
                          const sysmodel::SpectralInfo& spectral, unsigned threads,
                          TailRule tail) {
  if (!spectral.stable())
    throw NumericalError("Galerkin system is not asymptotically stable (spectral abscissa " +
                         std::to_string(spectral.abscissa) + ")");
  const FrequencySweep s = sweep(gsys, grid, threads);
  FrequencyAnalysis out;
  out.grid = grid;
  out.h2 = h2_from_response(grid, s.response, tail);
  out.hinf = hinf_from_response(s.response);
  out.ranking = ranking(out.h2);
  out.abscissa = spectral.abscissa;
  out.factorizations = s.factorizations;
  return out;
}

Eigen::VectorXd h2_norms(const GalerkinSystem& gsys, double omega_min, double omega_max, int nu,
                         unsigned threads, TailRule tail) {
  const FrequencyGrid grid = FrequencyGrid::log_spaced(omega_min, omega_max, nu);
  return analyze(gsys, grid, stability(gsys), threads, tail).h2;
}

Eigen::VectorXd hinf_norms(const GalerkinSystem& gsys, const FrequencyGrid& grid, unsigned threads) {
  return hinf_from_response(sweep(gsys, grid, threads).response);
}

std::vector<int> ranking(const Eigen::VectorXd& h2) {
  std::vector<int> order(static_cast<std::size_t>(h2.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return h2[a] > h2[b]; });
  return order;
}

std::vector<int> optimal_index_set(const Eigen::VectorXd& h2, int q) {
  if (q < 1 || q > h2.size())
    throw std::invalid_argument("optimal_index_set: q = " + std::to_string(q) +
                                " outside [1, " + std::to_string(h2.size()) + "]");
  std::vector<int> order = ranking(h2);
  order.resize(static_cast<std::size_t>(q));
  return order;
}

double error_bound(const Eigen::VectorXd& h2, std::span<const int> index_set, double u_norm) {
  if (!(u_norm >= 0.0)) throw std::invalid_argument("error_bound: input norm must be >= 0");
  std::vector<char> kept(static_cast<std::size_t>(h2.size()), 0);
  for (int i : index_set) {
    if (i < 0 || i >= h2.size())
      throw std::out_of_range("error_bound: index " + std::to_string(i) + " out of range");
    kept[static_cast<std::size_t>(i)] = 1;
  }
  double tail = 0.0;
  for (Eigen::Index i = 0; i < h2.size(); ++i)
    if (!kept[static_cast<std::size_t>(i)]) tail += h2[i] * h2[i];
  return std::sqrt(tail) * u_norm;
}

Eigen::VectorXd error_bound_curve(const Eigen::VectorXd& h2, double u_norm) {
  if (!(u_norm >= 0.0)) throw std::invalid_argument("error_bound_curve: input norm must be >= 0");
  const std::vector<int> order = ranking(h2);
  const Eigen::Index m = h2.size();
  Eigen::VectorXd bounds(m);
  // Accumulate the discarded tail from the smallest norm upwards.
  double tail = 0.0;
  for (Eigen::Index q = m; q >= 1; --q) {
    bounds[q - 1] = std::sqrt(tail) * u_norm;
    const double h = h2[order[static_cast<std::size_t>(q - 1)]];
    tail += h * h;
  }
  return bounds;
}

}  // namespace sparsepce::galerkin
