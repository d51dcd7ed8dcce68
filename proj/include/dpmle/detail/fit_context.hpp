#ifndef DPMLE_DETAIL_FIT_CONTEXT_HPP
#define DPMLE_DETAIL_FIT_CONTEXT_HPP

#include <vector>

#include "dpmle/detail/hmm_work.hpp"
#include "dpmle/penalized_em.hpp"

namespace dpmle::detail {

// Per-series caches reused across EM iterations: covariate keys never change,
// emission log-densities change only when the emission block does.
struct FitContext {
  const ObservationSet* obs = nullptr;
  std::size_t N = 0;
  std::vector<CovKeys> keys;
  std::vector<std::vector<double>> logf;
  std::vector<FBWork> work;

  void prepare(const ObservationSet& o, std::size_t n_states);
  void update_emissions(const EmissionParams& em);

  // Fills stats (u and v) for the given parameters; returns the total
  // log-likelihood. logf must be current.
  double run_estep(const ParameterVector& params, EStepStats& stats);

  double loglik(const ParameterVector& params);

  // Pooled occupancy estimate; tpms are rebuilt from the transition model,
  // emission densities come from the cache.
  std::vector<double> occupancy(const std::vector<double>& delta,
                                const TransitionModel& transition);
};

// Shared-cache variant of the non-stationary transition M-step.
CovariateLogit m_step_transition_nonstationary_ctx(FitContext& ctx, const EStepStats& stats,
                                                   double c_n, const ParameterVector& current,
                                                   const InnerOptions& opts);

}  // namespace dpmle::detail

#endif
