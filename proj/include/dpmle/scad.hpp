#ifndef DPMLE_SCAD_HPP
#define DPMLE_SCAD_HPP

#include <cmath>

#include "dpmle/errors.hpp"

namespace dpmle {

// Hyperparameters of the double penalty: SCAD scale lambda, stationary
// log-barrier weight c_n, SCAD shape constant a (> 2), and the relative
// tolerance used when counting distinct states after the fit.
struct PenaltyConfig {
  double lambda = 0.0;     // >= 0
  double c_n = 1.0;        // > 0
  double a = 3.7;          // > 2
  double merge_tol = 1e-3; // relative gap threshold for "distinct values"

  void validate() const {
    if (!(lambda >= 0.0)) throw config_error("penalty: lambda must be >= 0");
    if (!(c_n > 0.0)) throw config_error("penalty: c_n must be > 0");
    if (!(a > 2.0)) throw config_error("penalty: a must be > 2");
    if (!(merge_tol > 0.0)) throw config_error("penalty: merge_tol must be > 0");
  }
};

// SCAD derivative with sample-size weight m:
//   p'(eta) = m*lambda                              for eta <= lambda
//   p'(eta) = m*lambda*(a*lambda - eta)_+ / ((a-1)*lambda)   for eta > lambda
inline double scad_derivative(double eta, double lambda, double m, double a) {
  if (eta < 0.0) throw numeric_error("scad_derivative: eta must be >= 0");
  if (lambda <= 0.0) return 0.0;
  if (eta <= lambda) return m * lambda;
  const double num = a * lambda - eta;
  if (num <= 0.0) return 0.0;
  return m * num / (a - 1.0);
}

// Antiderivative of scad_derivative with p(0) = 0:
//   m*lambda*eta                          on [0, lambda]
//   quadratic blend                       on (lambda, a*lambda]
//   m*lambda^2*(a+1)/2                    beyond a*lambda
inline double scad_value(double eta, double lambda, double m, double a) {
  if (eta < 0.0) throw numeric_error("scad_value: eta must be >= 0");
  if (lambda <= 0.0) return 0.0;
  if (eta <= lambda) return m * lambda * eta;
  if (eta >= a * lambda) return m * lambda * lambda * (a + 1.0) * 0.5;
  // integral of the linear-in-eta segment from lambda to eta
  return m * lambda * lambda +
         m * (a * lambda * (eta - lambda) - 0.5 * (eta * eta - lambda * lambda)) / (a - 1.0);
}

}  // namespace dpmle

#endif
