#ifndef DPMLE_SPECIAL_FUNCTIONS_HPP
#define DPMLE_SPECIAL_FUNCTIONS_HPP

#include <cmath>

namespace dpmle {

// Digamma via upward recurrence into the asymptotic region.
inline double digamma(double x) {
  double result = 0.0;
  while (x < 6.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  result += std::log(x) - 0.5 * inv -
            inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 / 240.0)));
  return result;
}

inline double trigamma(double x) {
  double result = 0.0;
  while (x < 6.0) {
    result += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  result += inv * (1.0 + 0.5 * inv +
                   inv2 * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 / 30.0))));
  return result;
}

namespace detail {

// exp(-x) * I_nu(x) for nu in {0, 1}. Power series below 18, asymptotic
// expansion above; both branches are accurate to ~1e-12 at the crossover.
inline double bessel_ie(int nu, double x) {
  if (x < 18.0) {
    const double q = 0.25 * x * x;
    double term = (nu == 0) ? 1.0 : 0.5 * x;
    double sum = term;
    for (int k = 1; k < 80; ++k) {
      term *= q / (static_cast<double>(k) * (k + nu));
      sum += term;
      if (term < 1e-17 * sum) break;
    }
    return sum * std::exp(-x);
  }
  // I_nu(x) ~ e^x / sqrt(2 pi x) * sum_k (-1)^k a_k(nu) / x^k
  const double mu = 4.0 * nu * nu;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k <= 12; ++k) {
    term *= -(mu - (2.0 * k - 1.0) * (2.0 * k - 1.0)) / (8.0 * k * x);
    sum += term;
  }
  return sum / std::sqrt(2.0 * M_PI * x);
}

}  // namespace detail

// log I_0(x), safe for large x (no overflow).
inline double log_bessel_i0(double x) {
  x = std::fabs(x);
  return x + std::log(detail::bessel_ie(0, x));
}

// A_1(x) = I_1(x) / I_0(x), the mean resultant length of a von Mises.
inline double bessel_i1_over_i0(double x) {
  if (x <= 0.0) return 0.0;
  return detail::bessel_ie(1, x) / detail::bessel_ie(0, x);
}

}  // namespace dpmle

#endif
