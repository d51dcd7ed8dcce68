#ifndef DPMLE_EMISSIONS_HPP
#define DPMLE_EMISSIONS_HPP

#include <cmath>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "dpmle/errors.hpp"
#include "dpmle/observations.hpp"
#include "dpmle/special_functions.hpp"

namespace dpmle {

// Gamma parameterized by (mean, shape); scale = mean / shape.
struct GammaParams {
  double mean = 1.0;
  double shape = 1.0;
};

struct NormalParams {
  double mean = 0.0;
  double sd = 1.0;
};

struct VonMisesParams {
  double mean = 0.0;   // in (-pi, pi]
  double kappa = 1.0;  // >= 0
};

using ChannelParams = std::variant<GammaParams, NormalParams, VonMisesParams>;

double log_density(const ChannelParams& p, double y);
void validate_channel_params(const ChannelParams& p, const std::string& where);

// Per-state emission parameters. Multivariate emissions are products of
// independent channel families given the state.
struct EmissionParams {
  // states[state][channel]
  std::vector<std::vector<ChannelParams>> states;

  std::size_t order() const { return states.size(); }
  std::size_t n_channels() const { return states.empty() ? 0 : states[0].size(); }

  // Count of scalar emission parameters per state (2 per channel for all
  // supported families).
  int dim_theta1() const { return static_cast<int>(2 * n_channels()); }

  void validate() const;

  // log f_state(y_t) summed over channels; masked channels contribute 0.
  double log_density_at(const Series& s, std::size_t state, std::size_t t) const {
    double acc = 0.0;
    const auto& sp = states[state];
    for (std::size_t c = 0; c < sp.size(); ++c) {
      if (s.is_missing(c, t)) continue;
      acc += log_density(sp[c], s.values[c][t]);
    }
    return acc;
  }
};

inline double log_density(const ChannelParams& p, double y) {
  if (std::holds_alternative<GammaParams>(p)) {
    const auto& g = std::get<GammaParams>(p);
    if (y < 0.0) return -std::numeric_limits<double>::infinity();
    // clamp away from 0 so zero steps stay evaluable for any shape
    const double yy = (y < 1e-10) ? 1e-10 : y;
    return (g.shape - 1.0) * std::log(yy) - g.shape * yy / g.mean +
           g.shape * std::log(g.shape / g.mean) - std::lgamma(g.shape);
  }
  if (std::holds_alternative<NormalParams>(p)) {
    const auto& n = std::get<NormalParams>(p);
    const double z = (y - n.mean) / n.sd;
    return -0.5 * z * z - std::log(n.sd) - 0.5 * std::log(2.0 * M_PI);
  }
  const auto& v = std::get<VonMisesParams>(p);
  return v.kappa * std::cos(y - v.mean) - std::log(2.0 * M_PI) - log_bessel_i0(v.kappa);
}

inline void validate_channel_params(const ChannelParams& p, const std::string& where) {
  if (std::holds_alternative<GammaParams>(p)) {
    const auto& g = std::get<GammaParams>(p);
    if (!(g.mean > 0.0) || !(g.shape > 0.0) || !std::isfinite(g.mean) || !std::isfinite(g.shape))
      throw numeric_error(where + ": gamma requires mean > 0 and shape > 0");
  } else if (std::holds_alternative<NormalParams>(p)) {
    const auto& n = std::get<NormalParams>(p);
    if (!(n.sd > 0.0) || !std::isfinite(n.mean) || !std::isfinite(n.sd))
      throw numeric_error(where + ": normal requires finite mean and sd > 0");
  } else {
    const auto& v = std::get<VonMisesParams>(p);
    if (!(v.kappa >= 0.0) || !std::isfinite(v.kappa) || !std::isfinite(v.mean))
      throw numeric_error(where + ": von Mises requires finite mean and kappa >= 0");
  }
}

inline void EmissionParams::validate() const {
  if (states.empty()) throw dimension_error("emission params: no states");
  const std::size_t nch = states[0].size();
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i].size() != nch)
      throw dimension_error("emission params: dim(theta_1) must be constant across states");
    for (std::size_t c = 0; c < nch; ++c)
      validate_channel_params(states[i][c], "state " + std::to_string(i + 1));
  }
}

// Mean-type coordinate used for ordering/penalties: mean for gamma/normal,
// concentration for von Mises (angle means are not penalized).
inline double penalized_coordinate(const ChannelParams& p) {
  if (std::holds_alternative<GammaParams>(p)) return std::get<GammaParams>(p).mean;
  if (std::holds_alternative<NormalParams>(p)) return std::get<NormalParams>(p).mean;
  return std::get<VonMisesParams>(p).kappa;
}

}  // namespace dpmle

#endif
