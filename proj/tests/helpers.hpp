#ifndef DPMLE_TESTS_HELPERS_HPP
#define DPMLE_TESTS_HELPERS_HPP

#include <cmath>
#include <vector>

#include "dpmle/hmm.hpp"
#include "dpmle/rng.hpp"

namespace testutil {

using namespace dpmle;

// ---------------------------------------------------------------------------
// Brute-force oracles. These enumerate all N^T state paths and never touch
// the forward-backward code paths they are used to check.
// ---------------------------------------------------------------------------

inline double oracle_channel_logpdf(const ChannelParams& p, double y) {
  // independent re-derivation of the densities (kept deliberately separate
  // from dpmle::log_density)
  if (std::holds_alternative<GammaParams>(p)) {
    const auto& g = std::get<GammaParams>(p);
    const double scale = g.mean / g.shape;
    const double yy = std::max(y, 1e-10);
    return -std::lgamma(g.shape) - g.shape * std::log(scale) + (g.shape - 1.0) * std::log(yy) -
           yy / scale;
  }
  if (std::holds_alternative<NormalParams>(p)) {
    const auto& nm = std::get<NormalParams>(p);
    return -0.5 * std::log(2.0 * M_PI * nm.sd * nm.sd) -
           (y - nm.mean) * (y - nm.mean) / (2.0 * nm.sd * nm.sd);
  }
  const auto& vm = std::get<VonMisesParams>(p);
  // series for I0, fine for the small kappas used in tests
  double i0 = 1.0, term = 1.0;
  const double q = vm.kappa * vm.kappa / 4.0;
  for (int k = 1; k < 60; ++k) {
    term *= q / (k * static_cast<double>(k));
    i0 += term;
  }
  return vm.kappa * std::cos(y - vm.mean) - std::log(2.0 * M_PI * i0);
}

inline double oracle_state_logpdf(const Series& s, const EmissionParams& em, std::size_t state,
                                  std::size_t t) {
  double acc = 0.0;
  for (std::size_t c = 0; c < em.states[state].size(); ++c) {
    if (s.is_missing(c, t)) continue;
    acc += oracle_channel_logpdf(em.states[state][c], s.values[c][t]);
  }
  return acc;
}

// log-likelihood of one series by full path enumeration (logsumexp over paths)
inline double enum_loglik(const Series& s, const ParameterVector& params) {
  const std::size_t N = params.order();
  const std::size_t T = s.length();
  std::vector<std::size_t> path(T, 0);
  std::vector<double> logps;
  for (;;) {
    double lp = std::log(params.delta[path[0]]) + oracle_state_logpdf(s, params.emissions, path[0], 0);
    for (std::size_t t = 1; t < T; ++t) {
      Matrix g;
      if (std::holds_alternative<Homogeneous>(params.transition)) {
        g = std::get<Homogeneous>(params.transition).gamma;
      } else {
        std::vector<double> row(s.covariate_row(t), s.covariate_row(t) + s.n_covariates);
        g = transition_matrix_at(params.transition, std::span<const double>(row));
      }
      lp += std::log(g(path[t - 1], path[t])) + oracle_state_logpdf(s, params.emissions, path[t], t);
    }
    logps.push_back(lp);
    // next path in lexicographic order
    std::size_t pos = T;
    while (pos > 0) {
      if (++path[pos - 1] < N) break;
      path[pos - 1] = 0;
      --pos;
    }
    if (pos == 0) break;
  }
  double mx = logps[0];
  for (double v : logps) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : logps) sum += std::exp(v - mx);
  return mx + std::log(sum);
}

// posterior P[S_t = j | y] by enumeration
inline Matrix enum_posterior(const Series& s, const ParameterVector& params) {
  const std::size_t N = params.order();
  const std::size_t T = s.length();
  Matrix post(T, N);
  std::vector<std::size_t> path(T, 0);
  std::vector<double> logps;
  std::vector<std::vector<std::size_t>> paths;
  for (;;) {
    double lp = std::log(params.delta[path[0]]) + oracle_state_logpdf(s, params.emissions, path[0], 0);
    for (std::size_t t = 1; t < T; ++t) {
      const Matrix& g = std::get<Homogeneous>(params.transition).gamma;
      lp += std::log(g(path[t - 1], path[t])) + oracle_state_logpdf(s, params.emissions, path[t], t);
    }
    logps.push_back(lp);
    paths.push_back(path);
    std::size_t pos = T;
    while (pos > 0) {
      if (++path[pos - 1] < N) break;
      path[pos - 1] = 0;
      --pos;
    }
    if (pos == 0) break;
  }
  double mx = logps[0];
  for (double v : logps) mx = std::max(mx, v);
  double z = 0.0;
  for (double v : logps) z += std::exp(v - mx);
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const double w = std::exp(logps[i] - mx) / z;
    for (std::size_t t = 0; t < T; ++t) post(t, paths[i][t]) += w;
  }
  return post;
}

// most likely path by enumeration; ties to the lexicographically smallest
inline std::vector<int> enum_viterbi(const Series& s, const ParameterVector& params) {
  const std::size_t N = params.order();
  const std::size_t T = s.length();
  std::vector<std::size_t> path(T, 0);
  std::vector<int> best_path(T, 0);
  double best = -std::numeric_limits<double>::infinity();
  for (;;) {
    double lp = std::log(params.delta[path[0]]) + oracle_state_logpdf(s, params.emissions, path[0], 0);
    for (std::size_t t = 1; t < T; ++t) {
      const Matrix& g = std::get<Homogeneous>(params.transition).gamma;
      lp += std::log(g(path[t - 1], path[t])) + oracle_state_logpdf(s, params.emissions, path[t], t);
    }
    if (lp > best) {
      best = lp;
      for (std::size_t t = 0; t < T; ++t) best_path[t] = static_cast<int>(path[t]);
    }
    std::size_t pos = T;
    while (pos > 0) {
      if (++path[pos - 1] < N) break;
      path[pos - 1] = 0;
      --pos;
    }
    if (pos == 0) break;
  }
  return best_path;
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

inline ObservationSet make_obs(const std::vector<double>& y) {
  ObservationSet obs;
  obs.channels = {{"y", ChannelKind::Linear}};
  Series s;
  s.id = "s1";
  s.values = {y};
  s.missing = {std::vector<std::uint8_t>(y.size(), 0)};
  obs.series.push_back(std::move(s));
  return obs;
}

inline Matrix make_tpm(const std::vector<std::vector<double>>& rows) {
  Matrix g(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) g(i, j) = rows[i][j];
  return g;
}

// random N-state parameter vector with gamma or normal emissions
inline ParameterVector random_params(std::size_t n, bool gamma_family, Rng& rng) {
  ParameterVector p;
  Matrix g(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      g(i, j) = 0.1 + rng.uniform();
      row += g(i, j);
    }
    for (std::size_t j = 0; j < n; ++j) g(i, j) /= row;
  }
  p.transition = Homogeneous{g};
  p.delta.assign(n, 0.0);
  double ds = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    p.delta[j] = 0.2 + rng.uniform();
    ds += p.delta[j];
  }
  double acc = 0.0;
  for (std::size_t j = 0; j + 1 < n; ++j) {
    p.delta[j] /= ds;
    acc += p.delta[j];
  }
  p.delta[n - 1] = 1.0 - acc;  // exact simplex
  p.delta_mode = DeltaMode::Free;
  p.emissions.states.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (gamma_family)
      p.emissions.states[j] = {GammaParams{0.5 + 2.0 * rng.uniform() + 2.0 * static_cast<double>(j),
                                           0.8 + 4.0 * rng.uniform()}};
    else
      p.emissions.states[j] = {
          NormalParams{4.0 * rng.uniform() + 3.0 * static_cast<double>(j), 0.4 + rng.uniform()}};
  }
  return p;
}

// draw observations from the model itself (for coherent random instances)
inline ObservationSet sample_obs(const ParameterVector& params, std::size_t T, Rng& rng) {
  const auto& g = std::get<Homogeneous>(params.transition).gamma;
  ObservationSet obs;
  obs.channels = {{"y", std::holds_alternative<GammaParams>(params.emissions.states[0][0])
                            ? ChannelKind::Linear
                            : ChannelKind::Real}};
  Series s;
  s.id = "s1";
  s.values.assign(1, std::vector<double>(T));
  s.missing.assign(1, std::vector<std::uint8_t>(T, 0));
  std::size_t state = 0;
  double u = rng.uniform(), acc = 0.0;
  for (std::size_t j = 0; j < params.order(); ++j) {
    acc += params.delta[j];
    if (u < acc) { state = j; break; }
    state = j;
  }
  for (std::size_t t = 0; t < T; ++t) {
    if (t > 0) {
      u = rng.uniform();
      acc = 0.0;
      for (std::size_t j = 0; j < params.order(); ++j) {
        acc += g(state, j);
        if (u < acc) { state = j; break; }
        state = j;
      }
    }
    const auto& ch = params.emissions.states[state][0];
    if (std::holds_alternative<GammaParams>(ch)) {
      const auto& gp = std::get<GammaParams>(ch);
      s.values[0][t] = rng.gamma_mean_shape(gp.mean, gp.shape);
    } else {
      const auto& np = std::get<NormalParams>(ch);
      s.values[0][t] = rng.normal(np.mean, np.sd);
    }
  }
  obs.series.push_back(std::move(s));
  return obs;
}

}  // namespace testutil

#endif
