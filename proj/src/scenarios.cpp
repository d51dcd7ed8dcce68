#include "dpmle/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "dpmle/errors.hpp"
#include "dpmle/rng.hpp"
#include "dpmle/transitions.hpp"

namespace dpmle {

void ScenarioConfig::validate() const {
  if (scenario < 1 || scenario > 6)
    throw config_error("scenario must be in 1..6, got " + std::to_string(scenario));
  if (T < 2) throw config_error("scenario: T must be >= 2");
  if (means.size() != shapes.size() || means.empty())
    throw config_error("scenario: means and shapes must have equal nonzero length");
  if (outlier_frac < 0.0 || outlier_frac > 1.0)
    throw config_error("scenario: outlier fraction must lie in [0, 1]");
  double w = 0.0;
  for (double v : mixture_weights) w += v;
  if (std::fabs(w - 1.0) > 1e-12)
    throw config_error("scenario: mixture weights must sum to 1");
  if (steps_per_day < 2) throw config_error("scenario: steps_per_day must be >= 2");
}

namespace {

Matrix base_tpm(const ScenarioConfig& cfg) {
  const std::size_t n = cfg.means.size();
  Matrix g(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      g(i, j) = (i == j) ? cfg.tpm_diag : (1.0 - cfg.tpm_diag) / static_cast<double>(n - 1);
  return g;
}

// second mixture component: probability mass of the first row moved onto
// state 3, other rows as in the baseline
Matrix component2_tpm(const ScenarioConfig& cfg) {
  Matrix g = base_tpm(cfg);
  const std::size_t n = g.rows();
  if (n >= 3) {
    for (std::size_t j = 0; j < n; ++j) g(0, j) = 0.1;
    g(0, n - 1) = 0.8;
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += g(0, j);
    for (std::size_t j = 0; j < n; ++j) g(0, j) /= s;
  }
  return g;
}

// cosinor transition tpm for phase tod (1-based index into the day)
Matrix cosinor_tpm(const ScenarioConfig& cfg, int tod) {
  const std::size_t n = cfg.means.size();
  const double phase = 2.0 * M_PI * static_cast<double>(tod) / cfg.steps_per_day;
  const double shift = cfg.cosinor_cos_amp * std::cos(phase) + cfg.cosinor_sin_amp * std::sin(phase);
  const double off = (1.0 - cfg.tpm_diag) / static_cast<double>(n - 1);
  const double base_logit = std::log(off / cfg.tpm_diag);
  Matrix g(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      g(i, j) = (i == j) ? 1.0 : std::exp(base_logit + shift);
      sum += g(i, j);
    }
    for (std::size_t j = 0; j < n; ++j) g(i, j) /= sum;
  }
  return g;
}

int draw_state(Rng& rng, const Matrix& tpm, int from) {
  const std::size_t n = tpm.cols();
  double u = rng.uniform();
  for (std::size_t j = 0; j + 1 < n; ++j) {
    u -= tpm(static_cast<std::size_t>(from), j);
    if (u < 0.0) return static_cast<int>(j);
  }
  return static_cast<int>(n - 1);
}

int draw_initial(Rng& rng, const std::vector<double>& delta) {
  double u = rng.uniform();
  for (std::size_t j = 0; j + 1 < delta.size(); ++j) {
    u -= delta[j];
    if (u < 0.0) return static_cast<int>(j);
  }
  return static_cast<int>(delta.size() - 1);
}

}  // namespace

SimulatedData simulate(const ScenarioConfig& cfg) {
  cfg.validate();
  const std::size_t M = cfg.individuals();
  const std::size_t T = cfg.T;

  SimulatedData out;
  out.truth.tpm = base_tpm(cfg);
  out.truth.tpm_component2 = component2_tpm(cfg);

  out.obs.channels = {{"y", ChannelKind::Linear}};
  out.obs.covariate_names = {"tod"};
  out.obs.series.resize(M);
  out.truth.state_paths.resize(M);

  // per-individual heterogeneity draws come first so the path simulation is
  // unaffected by them
  std::vector<int> component(M, 0);
  std::vector<double> state3_mean(M, cfg.means.back());
  if (cfg.scenario == 3) {
    Rng comp_rng = Rng::stream(cfg.seed, 0xc03fULL);
    for (std::size_t m = 0; m < M; ++m)
      component[m] = (comp_rng.uniform() < cfg.mixture_weights[0]) ? 0 : 1;
    out.truth.mixture_component = component;
  }
  if (cfg.scenario == 4) {
    Rng het_rng = Rng::stream(cfg.seed, 0x4e7ULL);
    const double sd_log = std::sqrt(cfg.lognormal_variance);
    for (std::size_t m = 0; m < M; ++m)
      state3_mean[m] = std::exp(het_rng.normal(cfg.lognormal_logmean, sd_log));
    out.truth.state3_means = state3_mean;
  }
  if (cfg.scenario == 5) out.truth.state1_mean_paths.resize(M);

  const std::vector<double> pi_base = stationary_distribution(out.truth.tpm);

  for (std::size_t m = 0; m < M; ++m) {
    Rng rng = Rng::stream(cfg.seed, m);
    Series& s = out.obs.series[m];
    s.id = "ind" + std::to_string(m + 1);
    s.values.assign(1, std::vector<double>(T));
    s.missing.assign(1, std::vector<std::uint8_t>(T, 0));
    s.n_covariates = 1;
    s.covariates.resize(T);

    std::vector<double> means = cfg.means;
    means.back() = state3_mean[m];
    const Matrix& tpm = (cfg.scenario == 3 && component[m] == 1) ? out.truth.tpm_component2
                                                                 : out.truth.tpm;

    // AR(1) state-1 mean path: innovation sd chosen so the stationary sd is
    // the configured fraction of the base mean, truncated at the floor
    std::vector<double> mean1_path;
    if (cfg.scenario == 5) {
      mean1_path.resize(T);
      const double target_sd = cfg.ar_stationary_sd_frac * cfg.means[0];
      const double innov_sd =
          target_sd * std::sqrt(1.0 - cfg.ar_persistence * cfg.ar_persistence);
      double x = rng.normal(0.0, target_sd);
      for (std::size_t t = 0; t < T; ++t) {
        mean1_path[t] = std::max(cfg.means[0] + x, cfg.mean_floor);
        x = cfg.ar_persistence * x + rng.normal(0.0, innov_sd);
      }
      out.truth.state1_mean_paths[m] = mean1_path;
    }

    std::vector<int>& path = out.truth.state_paths[m];
    path.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
      const int tod = static_cast<int>(t % static_cast<std::size_t>(cfg.steps_per_day)) + 1;
      s.covariates[t] = static_cast<double>(tod);
      if (cfg.scenario == 6) {
        const Matrix g = cosinor_tpm(cfg, tod);
        path[t] = (t == 0) ? draw_initial(rng, stationary_distribution(g))
                           : draw_state(rng, g, path[t - 1]);
      } else {
        path[t] = (t == 0) ? draw_initial(rng, pi_base) : draw_state(rng, tpm, path[t - 1]);
      }
      const int j = path[t];
      double mu = means[static_cast<std::size_t>(j)];
      if (cfg.scenario == 5 && j == 0) mu = mean1_path[t];
      s.values[0][t] = rng.gamma_mean_shape(mu, cfg.shapes[static_cast<std::size_t>(j)]);
    }
  }

  if (cfg.scenario == 2) {
    // exactly round(frac * T * M) contaminated points, without replacement
    const std::size_t total = T * M;
    const std::size_t n_bad =
        static_cast<std::size_t>(std::llround(cfg.outlier_frac * static_cast<double>(total)));
    Rng cont_rng = Rng::stream(cfg.seed, 0x071e5ULL);
    std::vector<std::size_t> idx(total);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < n_bad && i + 1 < total; ++i) {
      const std::size_t j = i + cont_rng.uniform_index(total - i);
      std::swap(idx[i], idx[j]);
    }
    idx.resize(n_bad);
    std::sort(idx.begin(), idx.end());
    for (std::size_t flat : idx) {
      const std::size_t m = flat / T;
      const std::size_t t = flat % T;
      out.obs.series[m].values[0][t] += cont_rng.uniform(cfg.outlier_lo, cfg.outlier_hi);
    }
    out.truth.contaminated = std::move(idx);
  }
  return out;
}

EmpiricalReport empirical_checks(const SimulatedData& data, const ScenarioConfig& cfg) {
  const std::size_t n = cfg.means.size();
  EmpiricalReport rep;
  rep.state_counts.assign(n, 0);
  rep.state_emp_mean.assign(n, std::numeric_limits<double>::quiet_NaN());
  rep.state_emp_shape.assign(n, std::numeric_limits<double>::quiet_NaN());
  rep.occupancy.assign(n, 0.0);
  rep.transition_freq = Matrix(n, n);

  std::vector<double> sum(n, 0.0), sumsq(n, 0.0);
  Matrix counts(n, n);
  std::vector<Matrix> comp_counts;
  if (cfg.scenario == 3) comp_counts.assign(2, Matrix(n, n));

  std::size_t total = 0;
  for (std::size_t m = 0; m < data.obs.series.size(); ++m) {
    const auto& path = data.truth.state_paths[m];
    const auto& y = data.obs.series[m].values[0];
    for (std::size_t t = 0; t < path.size(); ++t) {
      const auto j = static_cast<std::size_t>(path[t]);
      rep.state_counts[j]++;
      sum[j] += y[t];
      sumsq[j] += y[t] * y[t];
      ++total;
      if (t > 0) {
        counts(static_cast<std::size_t>(path[t - 1]), j) += 1.0;
        if (cfg.scenario == 3)
          comp_counts[static_cast<std::size_t>(data.truth.mixture_component[m])](
              static_cast<std::size_t>(path[t - 1]), j) += 1.0;
      }
    }
  }

  for (std::size_t j = 0; j < n; ++j) {
    const double c = static_cast<double>(rep.state_counts[j]);
    rep.occupancy[j] = c / static_cast<double>(total);
    if (rep.state_counts[j] >= 2) {
      const double mean = sum[j] / c;
      const double var = (sumsq[j] - c * mean * mean) / (c - 1.0);
      rep.state_emp_mean[j] = mean;
      if (var > 0.0) rep.state_emp_shape[j] = mean * mean / var;
    }
  }

  auto normalize_rows = [n](Matrix& m) {
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n; ++j) row += m(i, j);
      for (std::size_t j = 0; j < n; ++j)
        m(i, j) = (row > 0.0) ? m(i, j) / row : std::numeric_limits<double>::quiet_NaN();
    }
  };
  rep.transition_freq = counts;
  normalize_rows(rep.transition_freq);
  if (cfg.scenario == 3) {
    rep.component_transition_freq = std::move(comp_counts);
    for (auto& m : rep.component_transition_freq) normalize_rows(m);
  }

  if (cfg.scenario == 6) {
    const auto phases = static_cast<std::size_t>(cfg.steps_per_day);
    rep.occupancy_by_phase.assign(phases, std::vector<double>(n, 0.0));
    std::vector<std::size_t> phase_counts(phases, 0);
    for (std::size_t m = 0; m < data.obs.series.size(); ++m) {
      const auto& path = data.truth.state_paths[m];
      for (std::size_t t = 0; t < path.size(); ++t) {
        const std::size_t ph = t % phases;
        rep.occupancy_by_phase[ph][static_cast<std::size_t>(path[t])] += 1.0;
        phase_counts[ph]++;
      }
    }
    for (std::size_t ph = 0; ph < phases; ++ph)
      for (std::size_t j = 0; j < n; ++j)
        rep.occupancy_by_phase[ph][j] /=
            std::max<double>(1.0, static_cast<double>(phase_counts[ph]));
  }
  return rep;
}

std::string EmpiricalReport::to_string() const {
  std::ostringstream os;
  os << "state  count  emp_mean  emp_shape  occupancy\n";
  for (std::size_t j = 0; j < state_counts.size(); ++j) {
    os << j + 1 << "  " << state_counts[j] << "  " << state_emp_mean[j] << "  "
       << state_emp_shape[j] << "  " << occupancy[j] << "\n";
  }
  os << "transition frequencies:\n";
  for (std::size_t i = 0; i < transition_freq.rows(); ++i) {
    for (std::size_t j = 0; j < transition_freq.cols(); ++j)
      os << transition_freq(i, j) << (j + 1 < transition_freq.cols() ? ' ' : '\n');
  }
  return os.str();
}

}  // namespace dpmle
