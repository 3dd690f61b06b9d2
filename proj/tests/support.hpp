#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "mirrorfield/rng.hpp"
#include "mirrorfield/vec.hpp"

namespace testing_support {

using mirrorfield::Rng;
using mirrorfield::Vec3;

// Upper tail of the chi-square distribution.
inline double chi_square_p(double statistic, int dof) {
  return boost::math::gamma_q(0.5 * dof, 0.5 * statistic);
}

// Pearson statistic for observed counts against expected counts.
inline double chi_square_statistic(std::span<const double> observed,
                                   std::span<const double> expected) {
  double s = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double d = observed[i] - expected[i];
    s += d * d / expected[i];
  }
  return s;
}

// Asymptotic Kolmogorov distribution with Stephens' small-sample correction.
inline double ks_p(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  if (lambda < 0.2) return 1.0;
  double sum = 0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += (j % 2 == 1 ? 1.0 : -1.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

// One-sample KS test of `xs` against the CDF `cdf`.
template <typename Cdf>
double ks_test(std::vector<double> xs, Cdf cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return ks_p(d, xs.size());
}

inline Vec3 random_unit(Rng& rng) {
  const double z = 2 * rng.uniform() - 1;
  const double phi = 2 * M_PI * rng.uniform();
  const double r = std::sqrt(std::max(0.0, 1 - z * z));
  return {r * std::cos(phi), r * std::sin(phi), z};
}

inline double max_abs_diff(const Vec3& a, const Vec3& b) {
  return std::max({std::abs(a.x - b.x), std::abs(a.y - b.y), std::abs(a.z - b.z)});
}

}  // namespace testing_support
