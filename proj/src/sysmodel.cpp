#include "sparsepce/sysmodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <lapacke.h>

#include "sparsepce/errors.hpp"

namespace sparsepce::sysmodel {

namespace {

void require_square(const Eigen::MatrixXd& M, Eigen::Index n, const char* what) {
  if (M.rows() != n || M.cols() != n)
    throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(n) + "x" +
                                std::to_string(n) + " coefficient matrix");
}

}  // namespace

AffineParametricSystem::AffineParametricSystem(std::vector<Eigen::MatrixXd> E_terms,
                                               std::vector<Eigen::MatrixXd> A_terms,
                                               Eigen::VectorXd B, Eigen::RowVectorXd C,
                                               polychaos::UniformDistribution dist)
    : E_terms_(std::move(E_terms)),
      A_terms_(std::move(A_terms)),
      B_terms_{std::move(B)},
      C_terms_{std::move(C)},
      dist_(std::move(dist)) {
  if (E_terms_.empty() || E_terms_.size() != A_terms_.size())
    throw std::invalid_argument("AffineParametricSystem: E and A need the same number of terms");
  const Eigen::Index n = E_terms_.front().rows();
  if (n < 1) throw std::invalid_argument("AffineParametricSystem: empty state");
  for (const auto& E : E_terms_) require_square(E, n, "AffineParametricSystem");
  for (const auto& A : A_terms_) require_square(A, n, "AffineParametricSystem");
  if (B_terms_.front().size() != n || C_terms_.front().size() != n)
    throw std::invalid_argument("AffineParametricSystem: B and C must have state dimension");
  set_distribution(dist_);
}

void AffineParametricSystem::set_distribution(polychaos::UniformDistribution dist) {
  if (static_cast<int>(dist.size()) != num_params())
    throw std::invalid_argument("AffineParametricSystem: distribution has " +
                                std::to_string(dist.size()) + " parameters, system has " +
                                std::to_string(num_params()));
  dist_ = std::move(dist);
}

void AffineParametricSystem::set_input_terms(std::vector<Eigen::VectorXd> B_terms) {
  if (B_terms.size() != 1 && static_cast<int>(B_terms.size()) != num_params() + 1)
    throw std::invalid_argument("set_input_terms: expected 1 or n_par + 1 terms");
  for (const auto& b : B_terms)
    if (b.size() != order()) throw std::invalid_argument("set_input_terms: wrong length");
  B_terms_ = std::move(B_terms);
}

void AffineParametricSystem::set_output_terms(std::vector<Eigen::RowVectorXd> C_terms) {
  if (C_terms.size() != 1 && static_cast<int>(C_terms.size()) != num_params() + 1)
    throw std::invalid_argument("set_output_terms: expected 1 or n_par + 1 terms");
  for (const auto& c : C_terms)
    if (c.size() != order()) throw std::invalid_argument("set_output_terms: wrong length");
  C_terms_ = std::move(C_terms);
}

StateSpace AffineParametricSystem::instantiate(std::span<const double> p) const {
  if (static_cast<int>(p.size()) != num_params())
    throw std::invalid_argument("instantiate: parameter point has " + std::to_string(p.size()) +
                                " entries, system has " + std::to_string(num_params()));
  StateSpace out{E_terms_.front(), A_terms_.front(), B_terms_.front(), C_terms_.front()};
  for (std::size_t l = 0; l < p.size(); ++l) {
    out.E += p[l] * E_terms_[l + 1];
    out.A += p[l] * A_terms_[l + 1];
    if (B_terms_.size() > 1) out.B += p[l] * B_terms_[l + 1];
    if (C_terms_.size() > 1) out.C += p[l] * C_terms_[l + 1];
  }
  return out;
}

std::complex<double> transfer_eval(const StateSpace& sys, std::complex<double> s) {
  using CMatrix = Eigen::MatrixXcd;
  const CMatrix pencil = s * sys.E.cast<std::complex<double>>() - sys.A.cast<std::complex<double>>();
  Eigen::FullPivLU<CMatrix> lu(pencil);
  // Relative pivot threshold: a pencil this close to singular means s sits on
  // (or numerically at) a pole.
  lu.setThreshold(64 * std::numeric_limits<double>::epsilon());
  if (!lu.isInvertible())
    throw NumericalError("transfer_eval: sE - A is singular at s = (" + std::to_string(s.real()) +
                         ", " + std::to_string(s.imag()) + "); s is at or near a pole");
  const Eigen::VectorXcd x = lu.solve(sys.B.cast<std::complex<double>>());
  return (sys.C.cast<std::complex<double>>() * x)(0);
}

SpectralInfo spectral_abscissa(const Eigen::MatrixXd& E, const Eigen::MatrixXd& A) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || E.rows() != n || E.cols() != n)
    throw std::invalid_argument("spectral_abscissa: E and A must be square of equal size");
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(E);
  const double rcond = lu.rcond();
  if (!(rcond > 64 * std::numeric_limits<double>::epsilon()))
    throw NumericalError("spectral_abscissa: mass matrix E is singular");
  return spectrum(lu.solve(A));
}

SpectralInfo spectrum(Eigen::MatrixXd M) {
  const Eigen::Index n = M.rows();
  if (M.cols() != n || n == 0) throw std::invalid_argument("spectrum: matrix must be square");
  Eigen::VectorXd wr(n), wi(n);
  const lapack_int info =
      LAPACKE_dgeev(LAPACK_COL_MAJOR, 'N', 'N', static_cast<lapack_int>(n), M.data(),
                    static_cast<lapack_int>(n), wr.data(), wi.data(), nullptr, 1, nullptr, 1);
  if (info != 0)
    throw NumericalError("spectral_abscissa: eigenvalue iteration failed (info " +
                         std::to_string(info) + ")");
  SpectralInfo out;
  out.eigenvalues.reserve(static_cast<std::size_t>(n));
  out.abscissa = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    out.eigenvalues.emplace_back(wr[i], wi[i]);
    out.abscissa = std::max(out.abscissa, wr[i]);
  }
  return out;
}

std::array<double, 14> MassSpringDamperMeans::as_array() const {
  std::array<double, 14> out{};
  std::copy(masses.begin(), masses.end(), out.begin());
  std::copy(chain_springs.begin(), chain_springs.end(), out.begin() + 4);
  std::copy(skip_springs.begin(), skip_springs.end(), out.begin() + 8);
  std::copy(dampers.begin(), dampers.end(), out.begin() + 10);
  return out;
}

MassSpringDamperMeans MassSpringDamperMeans::from_array(std::span<const double> values) {
  if (values.size() != kMassSpringDamperParams)
    throw std::invalid_argument("mass-spring-damper needs exactly 14 means, got " +
                                std::to_string(values.size()));
  MassSpringDamperMeans out;
  std::copy(values.begin(), values.begin() + 4, out.masses.begin());
  std::copy(values.begin() + 4, values.begin() + 8, out.chain_springs.begin());
  std::copy(values.begin() + 8, values.begin() + 10, out.skip_springs.begin());
  std::copy(values.begin() + 10, values.end(), out.dampers.begin());
  return out;
}

AffineParametricSystem build_mass_spring_damper(const MassSpringDamperMeans& means, double delta) {
  const auto values = means.as_array();
  return build_mass_spring_damper(std::span<const double>(values), delta);
}

AffineParametricSystem build_mass_spring_damper(std::span<const double> means, double delta) {
  if (means.size() != kMassSpringDamperParams)
    throw std::invalid_argument("mass-spring-damper needs exactly 14 means, got " +
                                std::to_string(means.size()));
  for (double v : means)
    if (!(v > 0.0) || !std::isfinite(v))
      throw std::invalid_argument("mass-spring-damper means must be positive");

  constexpr int masses = 4;
  constexpr int n = 2 * masses;
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(n, n);
  std::vector<Eigen::MatrixXd> E_terms(kMassSpringDamperParams + 1, zero);
  std::vector<Eigen::MatrixXd> A_terms(kMassSpringDamperParams + 1, zero);

  // Constant parts: position block of E and the kinematic identity q' = v.
  E_terms[0].topLeftCorner(masses, masses).setIdentity();
  A_terms[0].topRightCorner(masses, masses).setIdentity();

  // Mass l contributes E(4 + l, 4 + l).
  for (int l = 0; l < masses; ++l) E_terms[1 + l](masses + l, masses + l) = 1.0;

  // A link element between masses a and b (b = -1 for ground) adds
  // -coefficient * (e_a - e_b)(e_a - e_b)^T to the block `col_offset` of the
  // velocity rows: K enters the position columns, D the velocity columns.
  auto add_link = [&](Eigen::MatrixXd& A, int a, int b, int col_offset) {
    A(masses + a, col_offset + a) -= 1.0;
    if (b >= 0) {
      A(masses + a, col_offset + b) += 1.0;
      A(masses + b, col_offset + a) += 1.0;
      A(masses + b, col_offset + b) -= 1.0;
    }
  };
  constexpr std::array<std::array<int, 2>, 4> chain{{{0, -1}, {1, 0}, {2, 1}, {3, 2}}};
  constexpr std::array<std::array<int, 2>, 2> skips{{{0, 2}, {1, 3}}};
  for (int s = 0; s < 4; ++s) add_link(A_terms[5 + s], chain[s][0], chain[s][1], 0);
  for (int s = 0; s < 2; ++s) add_link(A_terms[9 + s], skips[s][0], skips[s][1], 0);
  for (int c = 0; c < 4; ++c) add_link(A_terms[11 + c], chain[c][0], chain[c][1], masses);

  Eigen::VectorXd B = Eigen::VectorXd::Zero(n);
  B(masses + 0) = 1.0;
  Eigen::RowVectorXd C = Eigen::RowVectorXd::Zero(n);
  C(masses - 1) = 1.0;

  return AffineParametricSystem(std::move(E_terms), std::move(A_terms), std::move(B), std::move(C),
                                polychaos::UniformDistribution(
                                    std::vector<double>(means.begin(), means.end()), delta));
}

}  // namespace sparsepce::sysmodel
