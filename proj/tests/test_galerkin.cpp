#include <cmath>
#include <memory>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "sparsepce/errors.hpp"
#include "sparsepce/galerkin.hpp"
#include "support/oracles.hpp"

using namespace sparsepce;
using namespace sparsepce::galerkin;

namespace {

std::shared_ptr<const polychaos::BasisSet> basis_for(const sysmodel::AffineParametricSystem& sys,
                                                     int degree) {
  return std::make_shared<const polychaos::BasisSet>(
      polychaos::BasisSet::for_distribution(sys.distribution(), degree));
}

// y' = -a y + u with one dummy parameter that enters nowhere.
sysmodel::AffineParametricSystem first_order(double a) {
  std::vector<Eigen::MatrixXd> E{Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Zero(1, 1)};
  std::vector<Eigen::MatrixXd> A{Eigen::MatrixXd::Constant(1, 1, -a), Eigen::MatrixXd::Zero(1, 1)};
  return {E, A, Eigen::VectorXd::Ones(1), Eigen::RowVectorXd::Ones(1),
          polychaos::UniformDistribution({1.0}, 0.0)};
}

// Small random stable affine system: E = I + small, A = -3I + small.
sysmodel::AffineParametricSystem random_affine(int n, int n_par, double delta, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  auto rand = [&](int r, int c) {
    Eigen::MatrixXd M(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) M(i, j) = u(rng);
    return M;
  };
  std::vector<Eigen::MatrixXd> E{Eigen::MatrixXd::Identity(n, n) + 0.1 * rand(n, n)};
  std::vector<Eigen::MatrixXd> A{-3.0 * Eigen::MatrixXd::Identity(n, n) + rand(n, n)};
  std::vector<double> means;
  for (int l = 0; l < n_par; ++l) {
    E.push_back(0.2 * rand(n, n));
    A.push_back(rand(n, n));
    means.push_back(1.0 + 0.5 * l);
  }
  return {E, A, rand(n, 1).col(0) + Eigen::VectorXd::Ones(n), rand(1, n).row(0),
          polychaos::UniformDistribution(means, delta)};
}

}  // namespace

TEST(Assemble, DimensionsAndBenchmarkSize) {
  const auto sys = sysmodel::build_mass_spring_damper(sysmodel::MassSpringDamperMeans{}, 0.05);
  const auto g = assemble(sys, basis_for(sys, 3));
  EXPECT_EQ(g.m, 680);
  EXPECT_EQ(g.n, 8);
  EXPECT_EQ(g.dimension(), 5440);
  EXPECT_EQ(g.C.rows(), 680);
  EXPECT_EQ(g.B.size(), 5440);
}

TEST(Assemble, BlocksAreExpectationsUnderQuadrature) {
  const int n = 3, n_par = 2, d = 2;
  const auto sys = random_affine(n, n_par, 0.2, 11);
  const auto basis = basis_for(sys, d);
  const auto g = assemble(sys, basis);
  const int m = basis->size();
  const Eigen::MatrixXd E_hat(g.E), A_hat(g.A);

  Eigen::MatrixXd E_ref = Eigen::MatrixXd::Zero(m * n, m * n), A_ref = E_ref;
  const auto [x, w] = oracle::gauss_legendre(4);
  for (std::size_t a = 0; a < x.size(); ++a) {
    for (std::size_t b = 0; b < x.size(); ++b) {
      const std::vector<double> p{basis->domain()[0].center() + basis->domain()[0].half_width() * x[a],
                                  basis->domain()[1].center() + basis->domain()[1].half_width() * x[b]};
      const auto phi = basis->evaluate(p);
      const auto inst = sys.instantiate(p);
      const double weight = w[a] * w[b];
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
          E_ref.block(i * n, j * n, n, n) += weight * phi[i] * phi[j] * inst.E;
          A_ref.block(i * n, j * n, n, n) += weight * phi[i] * phi[j] * inst.A;
        }
    }
  }
  EXPECT_LT((E_hat - E_ref).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LT((A_hat - A_ref).cwiseAbs().maxCoeff(), 1e-13);

  const auto mean = sys.at_mean();
  EXPECT_EQ(g.B.head(n), mean.B);
  EXPECT_TRUE(g.B.tail((m - 1) * n).isZero());
  const Eigen::MatrixXd C(g.C);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      EXPECT_EQ(C.block(i, j * n, 1, n), i == j ? Eigen::MatrixXd(mean.C) : Eigen::MatrixXd::Zero(1, n));
}

TEST(Assemble, ZeroVariationDecouples) {
  const auto sys = sysmodel::build_mass_spring_damper(sysmodel::MassSpringDamperMeans{}, 0.0);
  const auto g = assemble(sys, basis_for(sys, 2));
  const auto mean = sys.at_mean();
  const Eigen::MatrixXd E(g.E);
  for (int i = 0; i < g.m; ++i)
    for (int j = 0; j < g.m; ++j) {
      const Eigen::MatrixXd block = E.block(i * 8, j * 8, 8, 8);
      if (i == j)
        EXPECT_EQ(block, mean.E);
      else
        EXPECT_TRUE(block.isZero());
    }
  EXPECT_TRUE(g.B.tail(g.B.size() - 8).isZero());
}

TEST(Assemble, DegreeZeroIsMeanSystem) {
  const auto sys = sysmodel::build_mass_spring_damper(sysmodel::MassSpringDamperMeans{}, 0.05);
  const auto g = assemble(sys, basis_for(sys, 0));
  const auto mean = sys.at_mean();
  EXPECT_EQ(g.dimension(), 8);
  EXPECT_EQ(Eigen::MatrixXd(g.E), mean.E);
  EXPECT_LT((Eigen::MatrixXd(g.A) - mean.A).cwiseAbs().maxCoeff(), 1e-15);
  for (double w : {0.01, 0.5, 3.0}) {
    const auto h = galerkin_transfer(g, {0.0, w});
    EXPECT_LT(std::abs(h[0] - sysmodel::transfer_eval(mean, {0.0, w})), 1e-13);
  }
}

TEST(Transfer, ZeroVariationMatchesMeanSystem) {
  const auto sys = sysmodel::build_mass_spring_damper(sysmodel::MassSpringDamperMeans{}, 0.0);
  const auto g = assemble(sys, basis_for(sys, 1));
  const auto mean = sys.at_mean();
  const auto grid = FrequencyGrid::log_spaced(1e-2, 1e2, 20);
  for (double w : grid.omegas) {
    const auto h = galerkin_transfer(g, {0.0, w});
    const auto ref = sysmodel::transfer_eval(mean, {0.0, w});
    EXPECT_LT(std::abs(h[0] - ref), 1e-10 * std::max(1.0, std::abs(ref)));
    EXPECT_LT(h.tail(h.size() - 1).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Transfer, ConjugateSymmetry) {
  const auto sys = random_affine(4, 3, 0.3, 5);
  const auto g = assemble(sys, basis_for(sys, 2));
  for (double w : {0.1, 1.0, 7.0}) {
    const auto hp = galerkin_transfer(g, {0.0, w});
    const auto hm = galerkin_transfer(g, {0.0, -w});
    EXPECT_LT((hm - hp.conjugate()).cwiseAbs().maxCoeff(), 1e-13);
  }
}

TEST(Stability, MatchesMeanAtZeroVariation) {
  const auto sys = sysmodel::build_mass_spring_damper(sysmodel::MassSpringDamperMeans{}, 0.0);
  const auto g = assemble(sys, basis_for(sys, 1));
  const auto mean = sys.at_mean();
  EXPECT_NEAR(stability(g).abscissa, sysmodel::spectral_abscissa(mean.E, mean.A).abscissa, 1e-10);
}

TEST(Norms, FirstOrderH2Oracle) {
  for (double a : {0.5, 1.0, 2.0}) {
    const auto sys = first_order(a);
    const auto g = assemble(sys, basis_for(sys, 0));
    const double exact = 1.0 / std::sqrt(2.0 * a);
    const double h2 = h2_norms(g, 1e-2, 1e2, 200)[0];
    EXPECT_LT(std::abs(h2 - exact) / exact, 5e-3) << "a=" << a;
    // Without the tail term the loss is the discarded integral over
    // (w_max, inf), about a / (pi w_max) relative for large w_max.
    const double cut = h2_norms(g, 1e-2, 1e2, 200, 1, TailRule::truncate)[0];
    EXPECT_LT(cut, h2);
    EXPECT_NEAR((exact - cut) / exact, a / (std::numbers::pi * 1e2), 1.5e-3) << "a=" << a;
  }
}

TEST(Norms, TailTermIsNegligibleForFastDecay) {
  // Second-order low-pass, |H| ~ 1 / w^2: both rules agree closely.
  std::vector<Eigen::MatrixXd> E{Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Zero(2, 2)};
  Eigen::MatrixXd A0(2, 2);
  A0 << 0.0, 1.0, -1.0, -0.5;
  std::vector<Eigen::MatrixXd> A{A0, Eigen::MatrixXd::Zero(2, 2)};
  sysmodel::AffineParametricSystem sys(E, A, Eigen::Vector2d(0.0, 1.0), Eigen::RowVector2d(1.0, 0.0),
                                       polychaos::UniformDistribution({1.0}, 0.0));
  const auto g = assemble(sys, basis_for(sys, 0));
  const double with = h2_norms(g, 1e-2, 1e2, 400)[0];
  const double without = h2_norms(g, 1e-2, 1e2, 400, 1, TailRule::truncate)[0];
  // Analytic: ||1/(s^2 + c s + k)||_H2^2 = 1 / (2 c k).
  EXPECT_NEAR(with, 1.0, 5e-3);
  EXPECT_LT((with - without) / with, 1e-6);
}

TEST(Norms, FirstOrderHinfAndLinearity) {
  auto sys = first_order(1.0);
  const auto g = assemble(sys, basis_for(sys, 0));
  const auto grid = FrequencyGrid::log_spaced(1e-2, 1e2, 200);
  const auto hinf = hinf_norms(g, grid);
  EXPECT_NEAR(hinf[0], 1.0, 1e-2);
  GalerkinSystem g2 = g;
  g2.B *= 2.0;
  EXPECT_NEAR(hinf_norms(g2, grid)[0], 2.0 * hinf[0], 1e-14);
}

TEST(Norms, ZeroVariationHigherComponentsVanish) {
  const auto sys = sysmodel::build_mass_spring_damper(sysmodel::MassSpringDamperMeans{}, 0.0);
  const auto g = assemble(sys, basis_for(sys, 1));
  const auto h2 = h2_norms(g, 1e-2, 1e2, 200);
  EXPECT_GT(h2[0], 0.0);
  EXPECT_LT(h2.tail(h2.size() - 1).maxCoeff(), 1e-12);
}

TEST(Norms, SweepIsThreadIndependentAndCountsFactorizations) {
  const auto sys = random_affine(3, 2, 0.2, 9);
  const auto g = assemble(sys, basis_for(sys, 2));
  const auto grid = FrequencyGrid::log_spaced(1e-2, 1e2, 37);
  const auto one = sweep(g, grid, 1);
  const auto three = sweep(g, grid, 3);
  EXPECT_EQ(one.factorizations, 37u);
  EXPECT_EQ(three.factorizations, 37u);
  EXPECT_EQ(one.response, three.response);
}

TEST(Norms, UnstableSystemRejected) {
  const auto sys = first_order(-1.0);
  const auto g = assemble(sys, basis_for(sys, 0));
  EXPECT_THROW(h2_norms(g, 1e-2, 1e2, 50), NumericalError);
}

TEST(FrequencyGridTest, LogSpacing) {
  const auto grid = FrequencyGrid::log_spaced(1e-2, 1e2, 5);
  ASSERT_EQ(grid.size(), 5u);
  EXPECT_DOUBLE_EQ(grid.omegas.front(), 1e-2);
  EXPECT_DOUBLE_EQ(grid.omegas.back(), 1e2);
  EXPECT_NEAR(grid.omegas[2], 1.0, 1e-14);
  EXPECT_THROW(FrequencyGrid::log_spaced(1.0, 0.5, 10), std::invalid_argument);
  EXPECT_THROW(FrequencyGrid::log_spaced(1e-2, 1e2, 1), std::invalid_argument);
}

TEST(IndexSets, OptimalSetsAndBounds) {
  const Eigen::Vector3d h2(3.0, 1.0, 2.0);
  EXPECT_EQ(optimal_index_set(h2, 2), (std::vector<int>{0, 2}));
  EXPECT_EQ(optimal_index_set(h2, 3).size(), 3u);
  EXPECT_EQ(ranking(Eigen::Vector3d(1.0, 2.0, 1.0)), (std::vector<int>{1, 0, 2}));

  const int all[] = {0, 1, 2};
  EXPECT_DOUBLE_EQ(error_bound(h2, all, 1.0), 0.0);
  const int some[] = {0};
  EXPECT_DOUBLE_EQ(error_bound(h2, some, 0.0), 0.0);
  const int second[] = {1};
  EXPECT_DOUBLE_EQ(error_bound(Eigen::Vector2d(3.0, 4.0), second, 1.0), 3.0);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd norms(50);
  for (auto& v : norms) v = std::pow(10.0, -4.0 * u(rng));
  const auto curve = error_bound_curve(norms, 16.0);
  for (int q = 1; q < 50; ++q) EXPECT_LE(curve[q], curve[q - 1]);
  EXPECT_DOUBLE_EQ(curve[49], 0.0);
  for (int q = 1; q < 50; ++q) {
    const auto Iq = optimal_index_set(norms, q);
    const auto Iq1 = optimal_index_set(norms, q + 1);
    EXPECT_TRUE(std::equal(Iq.begin(), Iq.end(), Iq1.begin()));
    EXPECT_NEAR(curve[q - 1], error_bound(norms, Iq, 16.0), 1e-12);
  }
}
