#include <algorithm>
#include <cmath>
#include <limits>

#include "dpmle/detail/fit_context.hpp"
#include "dpmle/errors.hpp"
#include "dpmle/penalized_em.hpp"

namespace dpmle {

namespace {

double scad_total(const EmissionParams& em, const PenaltyConfig& penalty, double m_weight) {
  if (penalty.lambda <= 0.0) return 0.0;
  const auto vecs = gsf_vectors(em);
  const auto tau = gsf_order(vecs);
  const auto gaps = gsf_gaps(vecs, tau);
  double total = 0.0;
  for (double g : gaps) total += scad_value(std::max(g, 0.0), penalty.lambda, m_weight, penalty.a);
  return total;
}

double barrier_total(const std::vector<double>& pi, double c_n) {
  double total = 0.0;
  for (double p : pi) total += std::log(std::max(p, 1e-300));
  return c_n * total;
}

std::vector<double> pooled_initial(const EStepStats& stats) {
  std::vector<double> u1 = stats.initial_weights();
  double s = 0.0;
  for (double u : u1) s += u;
  for (double& u : u1) u /= s;
  return u1;
}

// occupancy from already-computed smoothing weights: sum_t u / sum_T
std::vector<double> occupancy_from_stats(const EStepStats& stats) {
  std::vector<double> pi = stats.state_weights();
  double total = 0.0;
  for (double p : pi) total += p;
  for (double& p : pi) p /= total;
  return pi;
}

}  // namespace

double penalized_objective(const ObservationSet& obs, const ParameterVector& params,
                           const PenaltyConfig& penalty) {
  const double m_weight = static_cast<double>(obs.total_length());
  const double ll = log_likelihood(obs, params);
  std::vector<double> pi;
  if (std::holds_alternative<Homogeneous>(params.transition))
    pi = stationary_distribution(std::get<Homogeneous>(params.transition).gamma);
  else
    pi = occupancy_estimate(obs, params);
  return ll + barrier_total(pi, penalty.c_n) - scad_total(params.emissions, penalty, m_weight);
}

namespace {

// One converged EM run; fills the trace, loglik, objective and stats.
struct EMState {
  ParameterVector params;
  std::vector<double> trace;
  double loglik = 0.0;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  EStepStats stats;
};

EMState run_penalized_em(detail::FitContext& ctx, const ObservationSet& obs,
                         const PenaltyConfig& penalty, ParameterVector params,
                         const FitOptions& opts) {
  const bool stationary = std::holds_alternative<Homogeneous>(params.transition);
  const double m_weight = static_cast<double>(obs.total_length());
  ctx.update_emissions(params.emissions);

  EMState st;
  double prev_obj = -std::numeric_limits<double>::infinity();
  int it = 0;
  for (;; ++it) {
    const double ll = ctx.run_estep(params, st.stats);
    std::vector<double> pi_term = stationary
        ? stationary_distribution(std::get<Homogeneous>(params.transition).gamma)
        : occupancy_from_stats(st.stats);
    const double obj = ll + barrier_total(pi_term, penalty.c_n) -
                       scad_total(params.emissions, penalty, m_weight);
    st.trace.push_back(obj);
    st.loglik = ll;
    st.objective = obj;
    if (it > 0 && std::fabs(obj - prev_obj) <= opts.objective_tol * (1.0 + std::fabs(prev_obj))) {
      st.converged = true;
      break;
    }
    if (it >= opts.max_iterations) break;
    prev_obj = obj;

    // transition block
    if (stationary) {
      const auto upd = m_step_transition_stationary(
          st.stats, penalty.c_n, std::get<Homogeneous>(params.transition).gamma, opts.inner);
      params.transition = Homogeneous{upd.gamma};
      params.delta = upd.pi;
    } else {
      params.transition = TransitionModel(detail::m_step_transition_nonstationary_ctx(
          ctx, st.stats, penalty.c_n, params, opts.inner));
      params.delta = pooled_initial(st.stats);
    }

    // emission block: spread parameters, then LLA-penalized means under the
    // GSF ordering re-derived at the current iterate
    const auto tau = gsf_order(gsf_vectors(params.emissions));
    params.emissions = m_step_emission_penalized(obs, st.stats, penalty, params, tau, opts.inner);
    ctx.update_emissions(params.emissions);
  }
  st.iterations = it;
  st.params = std::move(params);
  return st;
}

// Ties every penalized coordinate of two states at the midpoint.
void tie_pair(ParameterVector& p, std::size_t a, std::size_t b) {
  for (std::size_t c = 0; c < p.emissions.n_channels(); ++c) {
    ChannelParams& pa = p.emissions.states[a][c];
    ChannelParams& pb = p.emissions.states[b][c];
    if (std::holds_alternative<GammaParams>(pa)) {
      const double mid = 0.5 * (std::get<GammaParams>(pa).mean + std::get<GammaParams>(pb).mean);
      std::get<GammaParams>(pa).mean = mid;
      std::get<GammaParams>(pb).mean = mid;
    } else if (std::holds_alternative<NormalParams>(pa)) {
      const double mid =
          0.5 * (std::get<NormalParams>(pa).mean + std::get<NormalParams>(pb).mean);
      std::get<NormalParams>(pa).mean = mid;
      std::get<NormalParams>(pb).mean = mid;
    } else {
      const double mid =
          0.5 * (std::get<VonMisesParams>(pa).kappa + std::get<VonMisesParams>(pb).kappa);
      std::get<VonMisesParams>(pa).kappa = mid;
      std::get<VonMisesParams>(pb).kappa = mid;
    }
  }
}

}  // namespace

DPMLEFit fit_dpmle(const ObservationSet& obs, const PenaltyConfig& penalty,
                   const ParameterVector& init, const FitOptions& opts) {
  penalty.validate();
  init.validate();
  obs.validate();
  const std::size_t n = init.order();
  const double m_weight = static_cast<double>(obs.total_length());

  ParameterVector params = init;
  if (std::holds_alternative<Homogeneous>(init.transition)) {
    params.delta_mode = DeltaMode::Stationary;
    params.delta = stationary_distribution(std::get<Homogeneous>(params.transition).gamma);
  } else {
    params.delta_mode = DeltaMode::Free;
  }

  detail::FitContext ctx;
  ctx.prepare(obs, n);
  EMState best = run_penalized_em(ctx, obs, penalty, params, opts);

  // Fusion polish: gradient steps cannot cross the small likelihood bump into
  // an exact tie, so try the discrete move on the smallest unfused gap and
  // keep it only when the penalized objective strictly improves.
  if (opts.fusion_polish && penalty.lambda > 0.0 && n > 1) {
    for (std::size_t round = 0; round + 1 < n; ++round) {
      const auto vecs = gsf_vectors(best.params.emissions);
      const auto tau = gsf_order(vecs);
      const auto gaps = gsf_gaps(vecs, tau);
      std::size_t arg = gaps.size();
      double smallest = 0.0;
      for (std::size_t k = 0; k < gaps.size(); ++k) {
        if (gaps[k] <= 1e-9) continue;  // already tied
        // only worth attempting when the tie saves a noticeable penalty
        if (scad_value(gaps[k], penalty.lambda, m_weight, penalty.a) < 0.5) continue;
        if (arg == gaps.size() || gaps[k] < smallest) {
          arg = k;
          smallest = gaps[k];
        }
      }
      if (arg == gaps.size()) break;
      ParameterVector tied = best.params;
      tie_pair(tied, tau[arg], tau[arg + 1]);
      FitOptions cand_opts = opts;
      cand_opts.max_iterations = std::min(150, opts.max_iterations);
      EMState cand = run_penalized_em(ctx, obs, penalty, tied, cand_opts);
      if (cand.objective > best.objective + 1e-9)
        best = std::move(cand);
      else
        break;
    }
  }

  DPMLEFit fit;
  fit.objective_trace = std::move(best.trace);
  fit.loglik = best.loglik;
  fit.penalized_objective = best.objective;
  fit.iterations = best.iterations;
  fit.converged = best.converged;
  fit.params = std::move(best.params);
  fit.state_weights = best.stats.state_weights();
  fit.ordering = gsf_order(gsf_vectors(fit.params.emissions));
  fit.grouping = count_distinct_states(fit.params, penalty.merge_tol);
  fit.n_hat = fit.grouping.n_hat;
  fit.merged = merge_model(fit.params, fit.grouping, fit.state_weights);
  fit.merged_loglik =
      (fit.n_hat == static_cast<int>(n)) ? fit.loglik : log_likelihood(obs, fit.merged);
  return fit;
}

EMFit fit_em(const ObservationSet& obs, const ParameterVector& init, const FitOptions& opts) {
  init.validate();
  obs.validate();
  const std::size_t n = init.order();
  const bool stationary = std::holds_alternative<Homogeneous>(init.transition);

  ParameterVector params = init;
  if (stationary) {
    params.delta_mode = DeltaMode::Stationary;
    params.delta = stationary_distribution(std::get<Homogeneous>(params.transition).gamma);
  } else {
    params.delta_mode = DeltaMode::Free;
  }

  detail::FitContext ctx;
  ctx.prepare(obs, n);
  ctx.update_emissions(params.emissions);

  // zero-penalty configuration reused for the emission updates
  PenaltyConfig none;
  none.lambda = 0.0;
  none.c_n = 1.0;  // unused below: the transition step receives c_n = 0

  EMFit fit;
  EStepStats stats;
  double prev_ll = -std::numeric_limits<double>::infinity();
  int it = 0;
  for (;; ++it) {
    const double ll = ctx.run_estep(params, stats);
    fit.trace.push_back(ll);
    fit.loglik = ll;
    if (it > 0 && std::fabs(ll - prev_ll) <= opts.objective_tol * (1.0 + std::fabs(prev_ll))) {
      fit.converged = true;
      break;
    }
    if (it >= opts.max_iterations) break;
    prev_ll = ll;

    if (stationary) {
      const auto upd = m_step_transition_stationary(
          stats, 0.0, std::get<Homogeneous>(params.transition).gamma, opts.inner);
      params.transition = Homogeneous{upd.gamma};
      params.delta = upd.pi;
    } else {
      params.transition = TransitionModel(detail::m_step_transition_nonstationary_ctx(
          ctx, stats, 0.0, params, opts.inner));
      params.delta = pooled_initial(stats);
    }

    const auto tau = gsf_order(gsf_vectors(params.emissions));
    params.emissions = m_step_emission_penalized(obs, stats, none, params, tau, opts.inner);
    ctx.update_emissions(params.emissions);
  }
  fit.iterations = it;
  fit.params = params;
  return fit;
}

}  // namespace dpmle
