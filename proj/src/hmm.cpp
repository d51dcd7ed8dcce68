#include "dpmle/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "dpmle/detail/hmm_work.hpp"
#include "dpmle/errors.hpp"

namespace dpmle {

void ParameterVector::validate() const {
  const std::size_t n = delta.size();
  if (n == 0) throw dimension_error("parameter vector: empty initial distribution");
  double sum = 0.0;
  for (double d : delta) {
    if (!(d >= 0.0) || !std::isfinite(d))
      throw numeric_error("parameter vector: delta entries must be >= 0");
    sum += d;
  }
  if (std::fabs(sum - 1.0) > 1e-12)
    throw numeric_error("parameter vector: delta must sum to 1");
  if (transition_order(transition) != n)
    throw dimension_error("parameter vector: transition order mismatch");
  if (emissions.order() != n)
    throw dimension_error("parameter vector: emission order mismatch");
  emissions.validate();
  if (std::holds_alternative<Homogeneous>(transition)) {
    const Matrix& g = std::get<Homogeneous>(transition).gamma;
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (g(i, j) < 0.0 || g(i, j) > 1.0)
          throw numeric_error("parameter vector: tpm entries must lie in [0, 1]");
        row += g(i, j);
      }
      if (std::fabs(row - 1.0) > 1e-12)
        throw numeric_error("parameter vector: tpm rows must sum to 1");
    }
  }
}

namespace detail {

CovKeys build_cov_keys(const Series& s) {
  CovKeys out;
  const std::size_t T = s.length();
  out.key.assign(T, 0);
  if (s.n_covariates == 0) {
    out.rows.push_back({});
    return out;
  }
  std::map<std::vector<double>, std::uint32_t> seen;
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<double> row(s.covariate_row(t), s.covariate_row(t) + s.n_covariates);
    auto [it, inserted] = seen.emplace(row, static_cast<std::uint32_t>(out.rows.size()));
    if (inserted) out.rows.push_back(std::move(row));
    out.key[t] = it->second;
  }
  return out;
}

std::vector<Matrix> tpms_for(const TransitionModel& model, const CovKeys& keys) {
  std::vector<Matrix> tpms;
  if (std::holds_alternative<Homogeneous>(model)) {
    tpms.push_back(std::get<Homogeneous>(model).gamma);
    return tpms;
  }
  tpms.reserve(keys.rows.size());
  for (const auto& row : keys.rows)
    tpms.push_back(transition_matrix_at(model, std::span<const double>(row)));
  return tpms;
}

void emission_log_densities(const Series& s, const EmissionParams& em,
                            std::vector<double>& logf) {
  const std::size_t T = s.length();
  const std::size_t N = em.order();
  logf.assign(T * N, 0.0);
  for (std::size_t j = 0; j < N; ++j)
    for (std::size_t t = 0; t < T; ++t)
      logf[t * N + j] = em.log_density_at(s, j, t);
}

void scaled_forward(const std::string& series_id, const std::vector<double>& logf,
                    std::size_t T, std::size_t N, const std::vector<double>& delta,
                    const std::vector<Matrix>& tpms, const CovKeys& keys, FBWork& w) {
  w.T = T;
  w.N = N;
  w.alpha_bar.assign(T * N, 0.0);
  w.logz.assign(T, 0.0);
  w.cmax.assign(T, 0.0);
  const bool homog = tpms.size() == 1;

  std::vector<double> f(N);
  double logz = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const double* lf = &logf[t * N];
    double c = lf[0];
    for (std::size_t j = 1; j < N; ++j) c = std::max(c, lf[j]);
    if (!std::isfinite(c)) throw underflow_error(series_id, static_cast<long>(t) + 1);
    w.cmax[t] = c;
    for (std::size_t j = 0; j < N; ++j) f[j] = std::exp(lf[j] - c);

    double* a = &w.alpha_bar[t * N];
    double s = 0.0;
    if (t == 0) {
      for (std::size_t j = 0; j < N; ++j) {
        a[j] = delta[j] * f[j];
        s += a[j];
      }
    } else {
      const Matrix& g = homog ? tpms[0] : tpms[keys.key[t]];
      const double* prev = &w.alpha_bar[(t - 1) * N];
      for (std::size_t j = 0; j < N; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < N; ++i) acc += prev[i] * g(i, j);
        a[j] = acc * f[j];
        s += a[j];
      }
    }
    if (!(s > 0.0)) throw underflow_error(series_id, static_cast<long>(t) + 1);
    const double inv = 1.0 / s;
    for (std::size_t j = 0; j < N; ++j) a[j] *= inv;
    logz += std::log(s) + c;
    w.logz[t] = logz;
  }
  w.loglik = logz;
}

void scaled_backward(const std::vector<double>& logf, std::size_t T, std::size_t N,
                     const std::vector<Matrix>& tpms, const CovKeys& keys, FBWork& w) {
  w.beta_bar.assign(T * N, 0.0);
  w.logw.assign(T, 0.0);
  const bool homog = tpms.size() == 1;

  for (std::size_t j = 0; j < N; ++j) w.beta_bar[(T - 1) * N + j] = 1.0 / static_cast<double>(N);
  w.logw[T - 1] = std::log(static_cast<double>(N));

  std::vector<double> fb(N);
  for (std::size_t t = T - 1; t-- > 0;) {
    const double* lf = &logf[(t + 1) * N];
    const double c = w.cmax[t + 1];
    const double* next = &w.beta_bar[(t + 1) * N];
    for (std::size_t i = 0; i < N; ++i) fb[i] = std::exp(lf[i] - c) * next[i];

    const Matrix& g = homog ? tpms[0] : tpms[keys.key[t + 1]];
    double* b = &w.beta_bar[t * N];
    double s = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < N; ++i) acc += g(j, i) * fb[i];
      b[j] = acc;
      s += acc;
    }
    if (!(s > 0.0)) {
      // forward pass already vetted densities; a zero here means the chain
      // cannot reach any continuation, which the forward pass would have hit
      throw underflow_error("(backward)", static_cast<long>(t) + 1);
    }
    const double inv = 1.0 / s;
    for (std::size_t j = 0; j < N; ++j) b[j] *= inv;
    w.logw[t] = w.logw[t + 1] + c + std::log(s);
  }
}

}  // namespace detail

namespace {

void run_fb(const ObservationSet& obs, const ParameterVector& params,
            const std::function<void(std::size_t, const detail::FBWork&)>& sink) {
  params.validate();
  if (obs.n_channels() != params.emissions.n_channels())
    throw dimension_error("forward_backward: channel count mismatch");
  const std::size_t N = params.order();
  detail::FBWork w;
  std::vector<double> logf;
  for (std::size_t m = 0; m < obs.series.size(); ++m) {
    const Series& s = obs.series[m];
    const auto keys = detail::build_cov_keys(s);
    const auto tpms = detail::tpms_for(params.transition, keys);
    detail::emission_log_densities(s, params.emissions, logf);
    detail::scaled_forward(s.id, logf, s.length(), N, params.delta, tpms, keys, w);
    detail::scaled_backward(logf, s.length(), N, tpms, keys, w);
    sink(m, w);
  }
}

}  // namespace

FBResult forward_backward(const ObservationSet& obs, const ParameterVector& params) {
  FBResult out;
  out.series.resize(obs.series.size());
  const std::size_t N = params.order();
  run_fb(obs, params, [&](std::size_t m, const detail::FBWork& w) {
    SeriesFB& r = out.series[m];
    const std::size_t T = w.T;
    r.log_alpha = Matrix(T, N);
    r.log_beta = Matrix(T, N);
    r.posterior = Matrix(T, N);
    for (std::size_t t = 0; t < T; ++t) {
      double psum = 0.0;
      for (std::size_t j = 0; j < N; ++j) {
        r.log_alpha(t, j) = w.logz[t] + std::log(w.alpha(t, j));
        r.log_beta(t, j) = w.logw[t] + std::log(w.beta(t, j));
        r.posterior(t, j) = w.alpha(t, j) * w.beta(t, j);
        psum += r.posterior(t, j);
      }
      for (std::size_t j = 0; j < N; ++j) r.posterior(t, j) /= psum;
    }
    r.loglik = w.loglik;
    out.total_loglik += w.loglik;
  });
  return out;
}

double log_likelihood(const ObservationSet& obs, const ParameterVector& params) {
  params.validate();
  if (obs.n_channels() != params.emissions.n_channels())
    throw dimension_error("log_likelihood: channel count mismatch");
  const std::size_t N = params.order();
  detail::FBWork w;
  std::vector<double> logf;
  double total = 0.0;
  for (const Series& s : obs.series) {
    const auto keys = detail::build_cov_keys(s);
    const auto tpms = detail::tpms_for(params.transition, keys);
    detail::emission_log_densities(s, params.emissions, logf);
    detail::scaled_forward(s.id, logf, s.length(), N, params.delta, tpms, keys, w);
    total += w.loglik;
  }
  return total;
}

std::vector<std::vector<int>> viterbi(const ObservationSet& obs, const ParameterVector& params) {
  params.validate();
  const std::size_t N = params.order();
  std::vector<std::vector<int>> paths;
  paths.reserve(obs.series.size());
  std::vector<double> logf;
  for (const Series& s : obs.series) {
    const std::size_t T = s.length();
    const auto keys = detail::build_cov_keys(s);
    const auto tpms = detail::tpms_for(params.transition, keys);
    detail::emission_log_densities(s, params.emissions, logf);
    const bool homog = tpms.size() == 1;

    std::vector<double> score(T * N), prev_row(N);
    std::vector<int> back(T * N, 0);
    for (std::size_t j = 0; j < N; ++j)
      score[j] = std::log(params.delta[j]) + logf[j];
    for (std::size_t t = 1; t < T; ++t) {
      const Matrix& g = homog ? tpms[0] : tpms[keys.key[t]];
      for (std::size_t i = 0; i < N; ++i) prev_row[i] = score[(t - 1) * N + i];
      for (std::size_t j = 0; j < N; ++j) {
        double best = -std::numeric_limits<double>::infinity();
        int arg = 0;
        for (std::size_t i = 0; i < N; ++i) {
          const double cand = prev_row[i] + std::log(g(i, j));
          if (cand > best) {  // strict: ties keep the lower index
            best = cand;
            arg = static_cast<int>(i);
          }
        }
        score[t * N + j] = best + logf[t * N + j];
        back[t * N + j] = arg;
      }
    }
    std::vector<int> path(T);
    double best = -std::numeric_limits<double>::infinity();
    int last = 0;
    for (std::size_t j = 0; j < N; ++j) {
      if (score[(T - 1) * N + j] > best) {
        best = score[(T - 1) * N + j];
        last = static_cast<int>(j);
      }
    }
    if (!std::isfinite(best)) throw underflow_error(s.id, static_cast<long>(T));
    path[T - 1] = last;
    for (std::size_t t = T - 1; t-- > 0;) path[t] = back[(t + 1) * N + path[t + 1]];
    paths.push_back(std::move(path));
  }
  return paths;
}

std::vector<double> occupancy_estimate(const ObservationSet& obs, const ParameterVector& params) {
  const std::size_t N = params.order();
  std::vector<double> pi(N, 0.0);
  std::size_t total_T = 0;
  run_fb(obs, params, [&](std::size_t, const detail::FBWork& w) {
    for (std::size_t t = 0; t < w.T; ++t) {
      double psum = 0.0;
      for (std::size_t j = 0; j < N; ++j) psum += w.alpha(t, j) * w.beta(t, j);
      for (std::size_t j = 0; j < N; ++j) pi[j] += w.alpha(t, j) * w.beta(t, j) / psum;
    }
    total_T += w.T;
  });
  for (double& p : pi) p /= static_cast<double>(total_T);
  return pi;
}

}  // namespace dpmle
