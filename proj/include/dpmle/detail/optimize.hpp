#ifndef DPMLE_DETAIL_OPTIMIZE_HPP
#define DPMLE_DETAIL_OPTIMIZE_HPP

#include <cmath>
#include <functional>
#include <vector>

namespace dpmle::detail {

struct AscentResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Steepest ascent with backtracking line search and adaptive step growth.
// Only accepts improving steps, so value(x_out) >= value(x0) always. The
// callable evaluates f(x) and, when grad != nullptr, writes the gradient.
// step_init should match 1/curvature of the objective; the accepted step is
// carried across iterations.
inline AscentResult gradient_ascent(
    std::vector<double> x,
    const std::function<double(const std::vector<double>&, std::vector<double>*)>& f,
    int max_iterations, double grad_tol, double step_init = 1.0) {
  AscentResult res;
  const std::size_t n = x.size();
  std::vector<double> grad(n), trial(n);
  double value = f(x, &grad);
  double step = step_init;

  for (int it = 0; it < max_iterations; ++it) {
    res.iterations = it + 1;
    double gmax = 0.0, gnorm2 = 0.0;
    for (double g : grad) {
      gmax = std::max(gmax, std::fabs(g));
      gnorm2 += g * g;
    }
    if (gmax < grad_tol) {
      res.converged = true;
      break;
    }
    bool accepted = false;
    double s = step;
    for (int bt = 0; bt < 80; ++bt) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = x[i] + s * grad[i];
      const double cand = f(trial, nullptr);
      if (std::isfinite(cand) && cand > value + 1e-4 * s * gnorm2) {
        x.swap(trial);
        value = f(x, &grad);  // refresh the gradient at the accepted point
        step = s * 2.0;
        accepted = true;
        break;
      }
      s *= 0.25;
    }
    if (!accepted) {
      res.converged = true;  // no ascent possible within line-search range
      break;
    }
  }
  res.x = std::move(x);
  res.value = value;
  return res;
}

}  // namespace dpmle::detail

#endif
