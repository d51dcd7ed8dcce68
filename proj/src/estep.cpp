#include <cmath>

#include "dpmle/detail/fit_context.hpp"
#include "dpmle/errors.hpp"

namespace dpmle {

std::vector<double> EStepStats::initial_weights() const {
  std::vector<double> u1(order(), 0.0);
  for (const auto& s : series)
    for (std::size_t j = 0; j < s.N; ++j) u1[j] += s.u_at(0, j);
  return u1;
}

Matrix EStepStats::transition_counts() const {
  const std::size_t n = order();
  Matrix v(n, n);
  for (const auto& s : series) {
    for (std::size_t t = 1; t < s.T; ++t)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k) v(j, k) += s.v_at(t, j, k);
  }
  return v;
}

std::vector<double> EStepStats::state_weights() const {
  std::vector<double> w(order(), 0.0);
  for (const auto& s : series)
    for (std::size_t t = 0; t < s.T; ++t)
      for (std::size_t j = 0; j < s.N; ++j) w[j] += s.u_at(t, j);
  return w;
}

namespace detail {

void FitContext::prepare(const ObservationSet& o, std::size_t n_states) {
  obs = &o;
  N = n_states;
  keys.clear();
  keys.reserve(o.series.size());
  for (const Series& s : o.series) keys.push_back(build_cov_keys(s));
  logf.assign(o.series.size(), {});
  work.assign(o.series.size(), {});
}

void FitContext::update_emissions(const EmissionParams& em) {
  for (std::size_t m = 0; m < obs->series.size(); ++m)
    emission_log_densities(obs->series[m], em, logf[m]);
}

double FitContext::run_estep(const ParameterVector& params, EStepStats& stats) {
  stats.series.resize(obs->series.size());
  double total = 0.0;
  for (std::size_t m = 0; m < obs->series.size(); ++m) {
    const Series& s = obs->series[m];
    const std::size_t T = s.length();
    const auto tpms = tpms_for(params.transition, keys[m]);
    const bool homog = tpms.size() == 1;
    FBWork& w = work[m];
    scaled_forward(s.id, logf[m], T, N, params.delta, tpms, keys[m], w);
    scaled_backward(logf[m], T, N, tpms, keys[m], w);
    total += w.loglik;

    SeriesEStep& st = stats.series[m];
    st.T = T;
    st.N = N;
    st.u.assign(T * N, 0.0);
    st.v.assign((T - 1) * N * N, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
      double psum = 0.0;
      for (std::size_t j = 0; j < N; ++j) {
        st.u[t * N + j] = w.alpha(t, j) * w.beta(t, j);
        psum += st.u[t * N + j];
      }
      const double inv = 1.0 / psum;
      for (std::size_t j = 0; j < N; ++j) st.u[t * N + j] *= inv;
    }
    std::vector<double> fb(N);
    for (std::size_t t = 1; t < T; ++t) {
      const Matrix& g = homog ? tpms[0] : tpms[keys[m].key[t]];
      const double c = w.cmax[t];
      for (std::size_t k = 0; k < N; ++k)
        fb[k] = std::exp(logf[m][t * N + k] - c) * w.beta(t, k);
      double* vt = &st.v[(t - 1) * N * N];
      double vsum = 0.0;
      for (std::size_t j = 0; j < N; ++j) {
        const double aj = w.alpha(t - 1, j);
        for (std::size_t k = 0; k < N; ++k) {
          const double val = aj * g(j, k) * fb[k];
          vt[j * N + k] = val;
          vsum += val;
        }
      }
      const double inv = 1.0 / vsum;
      for (std::size_t i = 0; i < N * N; ++i) vt[i] *= inv;
    }
  }
  stats.loglik = total;
  return total;
}

double FitContext::loglik(const ParameterVector& params) {
  double total = 0.0;
  for (std::size_t m = 0; m < obs->series.size(); ++m) {
    const Series& s = obs->series[m];
    const auto tpms = tpms_for(params.transition, keys[m]);
    scaled_forward(s.id, logf[m], s.length(), N, params.delta, tpms, keys[m], work[m]);
    total += work[m].loglik;
  }
  return total;
}

std::vector<double> FitContext::occupancy(const std::vector<double>& delta,
                                          const TransitionModel& transition) {
  std::vector<double> pi(N, 0.0);
  std::size_t total_T = 0;
  for (std::size_t m = 0; m < obs->series.size(); ++m) {
    const Series& s = obs->series[m];
    const std::size_t T = s.length();
    const auto tpms = tpms_for(transition, keys[m]);
    FBWork& w = work[m];
    scaled_forward(s.id, logf[m], T, N, delta, tpms, keys[m], w);
    scaled_backward(logf[m], T, N, tpms, keys[m], w);
    for (std::size_t t = 0; t < T; ++t) {
      double psum = 0.0;
      for (std::size_t j = 0; j < N; ++j) psum += w.alpha(t, j) * w.beta(t, j);
      for (std::size_t j = 0; j < N; ++j) pi[j] += w.alpha(t, j) * w.beta(t, j) / psum;
    }
    total_T += T;
  }
  for (double& p : pi) p /= static_cast<double>(total_T);
  return pi;
}

}  // namespace detail

EStepStats e_step(const ObservationSet& obs, const ParameterVector& params) {
  params.validate();
  if (obs.n_channels() != params.emissions.n_channels())
    throw dimension_error("e_step: channel count mismatch");
  detail::FitContext ctx;
  ctx.prepare(obs, params.order());
  ctx.update_emissions(params.emissions);
  EStepStats stats;
  ctx.run_estep(params, stats);
  return stats;
}

}  // namespace dpmle
