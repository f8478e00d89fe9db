#pragma once

// Reference implementations that share no code with the library: Gauss-Legendre
// rules by Newton iteration on the classical Legendre recurrence, and the
// explicit binomial formula for P_n.

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

namespace oracle {

inline double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// P_n(x) = 2^-n sum_k C(n,k)^2 (x-1)^(n-k) (x+1)^k
inline double legendre_p(int n, double x) {
  double s = 0.0;
  for (int k = 0; k <= n; ++k)
    s += binomial(n, k) * binomial(n, k) * std::pow(x - 1.0, n - k) * std::pow(x + 1.0, k);
  return s / std::pow(2.0, n);
}

// Orthonormal under the density 1/2 on [-1, 1].
inline double legendre_orthonormal(int n, double x) { return std::sqrt(2.0 * n + 1.0) * legendre_p(n, x); }

// Nodes and weights of the N-point rule for the probability density 1/2 on
// [-1, 1]; exact for polynomials up to degree 2N - 1.
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int N) {
  std::vector<double> x(N), w(N);
  for (int i = 0; i < N; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (N + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= N; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = N * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = z;
    w[i] = 1.0 / ((1.0 - z * z) * dp * dp);  // 2/((1-z^2)P'^2), halved for the density
  }
  return {x, w};
}

}  // namespace oracle
