#ifndef DPMLE_RNG_HPP
#define DPMLE_RNG_HPP

#include <cmath>
#include <cstdint>

namespace dpmle {

// Deterministic xoshiro-style stream built on splitmix64. Variates are
// hand-rolled (Marsaglia-Tsang gamma, polar normal, Best-Fisher von Mises)
// so that identical seeds give bit-identical draws on every platform;
// std::gamma_distribution et al. are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {
    // warm up so small seeds decorrelate
    next_u64(); next_u64();
  }

  // Independent substream: hash-mix the base seed with a stream id.
  static Rng stream(std::uint64_t seed, std::uint64_t id) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (id + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return Rng(z ^ (z >> 31));
  }

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform on [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  std::uint64_t uniform_index(std::uint64_t n) {
    // multiply-shift; bias is negligible for n << 2^64
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

  double normal(double mean = 0.0, double sd = 1.0) {
    // polar Box-Muller; caches the second variate
    if (have_spare_) {
      have_spare_ = false;
      return mean + sd * spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    have_spare_ = true;
    return mean + sd * u * f;
  }

  // Gamma with given mean and shape (scale = mean / shape).
  double gamma_mean_shape(double mean, double shape) {
    return gamma_shape_scale(shape, mean / shape);
  }

  double gamma_shape_scale(double shape, double scale) {
    if (shape < 1.0) {
      const double u = uniform();
      return gamma_shape_scale(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    // Marsaglia & Tsang squeeze
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return scale * d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return scale * d * v;
    }
  }

  // Von Mises via Best & Fisher (1979) wrapped Cauchy rejection.
  double von_mises(double mean, double kappa) {
    if (kappa < 1e-8) return wrap_angle(mean + (2.0 * uniform() - 1.0) * M_PI);
    const double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
    const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa);
    const double r = (1.0 + rho * rho) / (2.0 * rho);
    for (;;) {
      const double u1 = uniform();
      const double z = std::cos(M_PI * u1);
      const double f = (1.0 + r * z) / (r + z);
      const double c = kappa * (r - f);
      const double u2 = uniform();
      if (c * (2.0 - c) - u2 > 0.0 || std::log(c / u2) + 1.0 - c >= 0.0) {
        const double u3 = uniform();
        const double sign = (u3 > 0.5) ? 1.0 : -1.0;
        return wrap_angle(mean + sign * std::acos(f));
      }
    }
  }

  // Sample index from unnormalized nonnegative weights.
  template <typename Vec>
  std::size_t categorical(const Vec& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform() * total;
    for (std::size_t i = 0; i + 1 < static_cast<std::size_t>(weights.size()); ++i) {
      u -= weights[i];
      if (u < 0.0) return i;
    }
    return static_cast<std::size_t>(weights.size()) - 1;
  }

  // Wraps to (-pi, pi]; both boundaries map to +pi.
  static double wrap_angle(double x) {
    double w = std::fmod(x + M_PI, 2.0 * M_PI);
    if (w <= 0.0) w += 2.0 * M_PI;
    return w - M_PI;
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dpmle

#endif
