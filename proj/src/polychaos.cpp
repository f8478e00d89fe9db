#include "sparsepce/polychaos.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include <spdlog/spdlog.h>

namespace sparsepce::polychaos {

int MultiIndex::total_degree() const {
  return std::accumulate(exponents.begin(), exponents.end(), 0);
}

UniformDistribution::UniformDistribution(std::vector<double> mu, double rel)
    : means(std::move(mu)), delta(rel) {
  if (means.empty()) throw std::invalid_argument("UniformDistribution: no parameters");
  if (!(delta >= 0.0) || !std::isfinite(delta))
    throw std::invalid_argument("UniformDistribution: relative variation must be >= 0");
  for (double m : means) {
    if (m == 0.0 || !std::isfinite(m))
      throw std::invalid_argument("UniformDistribution: means must be finite and nonzero");
  }
}

Interval UniformDistribution::interval(std::size_t l) const {
  const double mu = means.at(l);
  const double r = delta * std::abs(mu);
  return {mu - r, mu + r};
}

std::vector<Interval> UniformDistribution::domain() const {
  std::vector<Interval> out;
  out.reserve(means.size());
  for (std::size_t l = 0; l < means.size(); ++l) out.push_back(interval(l));
  return out;
}

std::size_t basis_cardinality(int n_par, int degree) {
  if (n_par < 1) throw std::invalid_argument("basis_cardinality: n_par must be >= 1");
  if (degree < 0) throw std::invalid_argument("basis_cardinality: degree must be >= 0");
  // C(n_par + d, d) built as prod_{j=1..d} (n_par + j) / j; every partial
  // product is itself a binomial coefficient, so the division is exact.
  constexpr auto limit = static_cast<unsigned long long>(std::numeric_limits<int>::max());
  unsigned long long count = 1;
  for (int j = 1; j <= degree; ++j) {
    const auto factor = static_cast<unsigned long long>(n_par) + static_cast<unsigned long long>(j);
    if (count > std::numeric_limits<unsigned long long>::max() / factor)
      throw std::invalid_argument("basis_cardinality: basis size overflows the index type");
    count = count * factor / static_cast<unsigned long long>(j);
    if (count > limit)
      throw std::invalid_argument("basis_cardinality: basis size overflows the index type");
  }
  return static_cast<std::size_t>(count);
}

namespace {

// Compositions of `remaining` into exponents[l..], first variable largest
// first.
void append_compositions(std::vector<int>& exponents, std::size_t l, int remaining,
                         std::vector<MultiIndex>& out) {
  if (l + 1 == exponents.size()) {
    exponents[l] = remaining;
    out.push_back(MultiIndex{exponents});
    return;
  }
  for (int e = remaining; e >= 0; --e) {
    exponents[l] = e;
    append_compositions(exponents, l + 1, remaining - e, out);
  }
  exponents[l] = 0;
}

}  // namespace

std::vector<MultiIndex> multi_index_set(int n_par, int degree) {
  const std::size_t m = basis_cardinality(n_par, degree);
  std::vector<MultiIndex> out;
  out.reserve(m);
  std::vector<int> exponents(static_cast<std::size_t>(n_par), 0);
  for (int j = 0; j <= degree; ++j) append_compositions(exponents, 0, j, out);
  return out;
}

double recurrence_coefficient(int k) {
  if (k < 1) throw std::invalid_argument("recurrence_coefficient: k must be >= 1");
  const double kk = static_cast<double>(k);
  return kk / std::sqrt(4.0 * kk * kk - 1.0);
}

Eigen::VectorXd legendre_values(int max_degree, double xi) {
  if (max_degree < 0) throw std::invalid_argument("legendre_values: negative degree");
  Eigen::VectorXd phi(max_degree + 1);
  phi[0] = 1.0;
  if (max_degree >= 1) phi[1] = xi / recurrence_coefficient(1);
  for (int k = 1; k < max_degree; ++k) {
    phi[k + 1] = (xi * phi[k] - recurrence_coefficient(k) * phi[k - 1]) / recurrence_coefficient(k + 1);
  }
  return phi;
}

double legendre(int degree, double xi) { return legendre_values(degree, xi)[degree]; }

BasisSet::BasisSet(int n_par, int degree, std::vector<Interval> domain)
    : n_par_(n_par), degree_(degree), domain_(std::move(domain)) {
  indices_ = multi_index_set(n_par, degree);
  if (domain_.size() != static_cast<std::size_t>(n_par))
    throw std::invalid_argument("BasisSet: domain has " + std::to_string(domain_.size()) +
                                " intervals for " + std::to_string(n_par) + " parameters");
  for (const auto& iv : domain_) {
    if (!(iv.upper > iv.lower) || !std::isfinite(iv.lower) || !std::isfinite(iv.upper))
      throw std::invalid_argument("BasisSet: every domain interval needs lower < upper");
  }
}

BasisSet BasisSet::for_distribution(const UniformDistribution& dist, int degree) {
  // A degenerate distribution (delta = 0) still needs a nonempty reference
  // interval; the basis is then only ever evaluated at the mean.
  std::vector<Interval> domain = dist.domain();
  for (std::size_t l = 0; l < domain.size(); ++l) {
    if (!(domain[l].upper > domain[l].lower)) {
      const double mu = dist.means[l];
      domain[l] = {mu - std::abs(mu), mu + std::abs(mu)};
    }
  }
  return BasisSet(static_cast<int>(dist.size()), degree, std::move(domain));
}

int BasisSet::position(const MultiIndex& alpha) const {
  if (alpha.size() != static_cast<std::size_t>(n_par_)) return -1;
  const int deg = alpha.total_degree();
  if (deg > degree_ || std::any_of(alpha.exponents.begin(), alpha.exponents.end(),
                                   [](int e) { return e < 0; }))
    return -1;
  // Within a degree block indices are sorted descending, so search with the
  // reversed comparator starting at the block offset.
  const int begin = deg == 0 ? 0 : static_cast<int>(basis_cardinality(n_par_, deg - 1));
  const int end = static_cast<int>(basis_cardinality(n_par_, deg));
  auto first = indices_.begin() + begin;
  auto last = indices_.begin() + end;
  auto it = std::lower_bound(first, last, alpha,
                             [](const MultiIndex& a, const MultiIndex& b) { return a > b; });
  if (it == last || *it != alpha) return -1;
  return static_cast<int>(it - indices_.begin());
}

int BasisSet::unit_position(int l) const {
  if (l < 0 || l >= n_par_) throw std::out_of_range("unit_position: variable out of range");
  if (degree_ < 1) return -1;
  return 1 + l;
}

double BasisSet::standardize(int l, double p) const {
  const Interval& iv = domain_.at(static_cast<std::size_t>(l));
  return (p - iv.center()) / iv.half_width();
}

Eigen::VectorXd BasisSet::evaluate(std::span<const double> p) const {
  if (p.size() != static_cast<std::size_t>(n_par_))
    throw std::invalid_argument("evaluate: parameter point has " + std::to_string(p.size()) +
                                " entries, basis expects " + std::to_string(n_par_));
  // phi_k(xi_l) for every variable, then products over the multi-index.
  Eigen::MatrixXd univariate(degree_ + 1, n_par_);
  bool outside = false;
  for (int l = 0; l < n_par_; ++l) {
    if (!domain_[static_cast<std::size_t>(l)].contains(p[static_cast<std::size_t>(l)])) outside = true;
    univariate.col(l) = legendre_values(degree_, standardize(l, p[static_cast<std::size_t>(l)]));
  }
  if (outside) {
    static std::atomic<bool> warned{false};
    if (!warned.exchange(true))
      spdlog::warn("basis evaluated outside its parameter domain; using polynomial extension");
  }
  Eigen::VectorXd values(size());
  for (int i = 0; i < size(); ++i) {
    const MultiIndex& alpha = indices_[static_cast<std::size_t>(i)];
    double v = 1.0;
    for (int l = 0; l < n_par_; ++l) {
      const int e = alpha.exponents[static_cast<std::size_t>(l)];
      if (e != 0) v *= univariate(e, l);
    }
    values[i] = v;
  }
  return values;
}

double BasisSet::triple_product(int i, int j, int l) const {
  if (i < 0 || i >= size() || j < 0 || j >= size())
    throw std::out_of_range("triple_product: basis position out of range");
  if (l < 0 || l >= n_par_) throw std::out_of_range("triple_product: variable out of range");
  const auto& a = indices_[static_cast<std::size_t>(i)].exponents;
  const auto& b = indices_[static_cast<std::size_t>(j)].exponents;
  for (int v = 0; v < n_par_; ++v) {
    if (v != l && a[static_cast<std::size_t>(v)] != b[static_cast<std::size_t>(v)]) return 0.0;
  }
  const int al = a[static_cast<std::size_t>(l)];
  const int bl = b[static_cast<std::size_t>(l)];
  if (std::abs(al - bl) != 1) return 0.0;
  return recurrence_coefficient(std::max(al, bl));
}

std::vector<BasisSet::Coupling> BasisSet::couplings(int l) const {
  if (l < 0 || l >= n_par_) throw std::out_of_range("couplings: variable out of range");
  std::vector<Coupling> out;
  for (int i = 0; i < size(); ++i) {
    MultiIndex lower = indices_[static_cast<std::size_t>(i)];
    const int e = lower.exponents[static_cast<std::size_t>(l)];
    if (e == 0) continue;
    lower.exponents[static_cast<std::size_t>(l)] = e - 1;
    const int j = position(lower);
    const double beta = recurrence_coefficient(e);
    out.push_back({i, j, beta});
    out.push_back({j, i, beta});
  }
  return out;
}

Eigen::MatrixXd BasisSet::vandermonde(const Eigen::MatrixXd& samples) const {
  if (samples.rows() < 1) throw std::invalid_argument("vandermonde: empty sample list");
  if (samples.cols() != n_par_)
    throw std::invalid_argument("vandermonde: samples have " + std::to_string(samples.cols()) +
                                " columns, basis expects " + std::to_string(n_par_));
  Eigen::MatrixXd V(samples.rows(), size());
  std::vector<double> point(static_cast<std::size_t>(n_par_));
  for (Eigen::Index r = 0; r < samples.rows(); ++r) {
    for (int l = 0; l < n_par_; ++l) point[static_cast<std::size_t>(l)] = samples(r, l);
    V.row(r) = evaluate(point).transpose();
  }
  return V;
}

Eigen::MatrixXd column_subset(const Eigen::MatrixXd& V, std::span<const int> columns) {
  std::vector<char> seen(static_cast<std::size_t>(V.cols()), 0);
  Eigen::MatrixXd out(V.rows(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) {
    const int j = columns[c];
    if (j < 0 || j >= V.cols())
      throw std::out_of_range("column_subset: column " + std::to_string(j) + " out of range");
    if (seen[static_cast<std::size_t>(j)])
      throw std::invalid_argument("column_subset: duplicate column " + std::to_string(j));
    seen[static_cast<std::size_t>(j)] = 1;
    out.col(static_cast<Eigen::Index>(c)) = V.col(j);
  }
  return out;
}

}  // namespace sparsepce::polychaos
