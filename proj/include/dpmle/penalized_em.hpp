#ifndef DPMLE_PENALIZED_EM_HPP
#define DPMLE_PENALIZED_EM_HPP

#include <cstddef>
#include <vector>

#include "dpmle/hmm.hpp"
#include "dpmle/scad.hpp"

namespace dpmle {

// Posterior state weights u_j(t) and transition weights v_jk(t) for one
// series. v is indexed by the transition into t: entry (t-1, j, k) is
// P[S_{t-1} = j, S_t = k | y] for t = 1..T-1 (0-based).
struct SeriesEStep {
  std::size_t T = 0, N = 0;
  std::vector<double> u;  // T x N
  std::vector<double> v;  // (T-1) x N x N

  double u_at(std::size_t t, std::size_t j) const { return u[t * N + j]; }
  double v_at(std::size_t t, std::size_t j, std::size_t k) const {
    return v[(t - 1) * N * N + j * N + k];
  }
};

struct EStepStats {
  std::vector<SeriesEStep> series;
  double loglik = 0.0;

  std::size_t order() const { return series.empty() ? 0 : series[0].N; }
  // pooled u_j(1) over individuals
  std::vector<double> initial_weights() const;
  // pooled sum_t v_jk(t) as an N x N matrix
  Matrix transition_counts() const;
  // pooled sum_t u_j(t) per state
  std::vector<double> state_weights() const;
};

EStepStats e_step(const ObservationSet& obs, const ParameterVector& params);

// Controls for the inner numeric maximizers used by the M-steps.
struct InnerOptions {
  int max_iterations = 200;
  double grad_tol = 1e-8;
};

struct TransitionUpdate {
  Matrix gamma;
  std::vector<double> pi;
  double objective = 0.0;
  int iterations = 0;
};

// Maximizes sum_j u_j(1) log pi_j + c_n sum_j log pi_j + sum v_ij log gamma_ij
// over row-stochastic tpms, with pi the stationary distribution of the tpm.
// Parameterized by per-row logits (diagonal reference 0); ascent starts from
// the current tpm so the objective never decreases.
TransitionUpdate m_step_transition_stationary(const EStepStats& stats, double c_n,
                                              const Matrix& current,
                                              const InnerOptions& opts = {});

// Non-stationary analogue: maximizes sum_t sum_ij v_ij(t) log gamma_ij(t) +
// c_n sum_j log pi_hat_j(beta) over the logit regression coefficients, with
// pi_hat the occupancy estimate recomputed as a function of beta (all other
// parameters frozen). The occupancy gradient uses forward differences.
CovariateLogit m_step_transition_nonstationary(const ObservationSet& obs,
                                               const EStepStats& stats, double c_n,
                                               const ParameterVector& current,
                                               const InnerOptions& opts = {});

// Per-state vectors the GSF ordering and gap penalty operate on: means of
// gamma/normal channels plus von Mises concentrations. With more than one
// coordinate, each is standardized by its cross-state standard deviation.
std::vector<std::vector<double>> gsf_vectors(const EmissionParams& em);

// Group-Sort-Fuse ordering: tau[0] is the state of smallest l2 norm, each
// following entry the nearest unchosen state; ties break to the lower index.
std::vector<std::size_t> gsf_order(const std::vector<std::vector<double>>& mu_vectors);

// Consecutive gaps along the GSF chain: scalar differences in the 1-D case,
// l2 norms of consecutive differences otherwise.
std::vector<double> gsf_gaps(const std::vector<std::vector<double>>& vectors,
                             const std::vector<std::size_t>& tau);

// Updates the emission block: unpenalized parameters (sd, shape,
// concentration, angle mean) by weighted maximum likelihood at the current
// means, then the penalized means by maximizing the local linear
// approximation of the SCAD penalty under the GSF ordering tau.
EmissionParams m_step_emission_penalized(const ObservationSet& obs, const EStepStats& stats,
                                         const PenaltyConfig& penalty,
                                         const ParameterVector& current,
                                         const std::vector<std::size_t>& tau,
                                         const InnerOptions& opts = {});

struct StateGrouping {
  std::vector<std::vector<std::size_t>> groups;  // states in GSF order
  int n_hat = 0;
};

// Groups consecutive GSF-ordered states whose gap falls below
// merge_tol * (max - min of the fitted means/norms); n_hat = group count.
StateGrouping count_distinct_states(const ParameterVector& params, double merge_tol);

// Collapses grouped states: transitions by row-averaged sums (the merged
// probability A -> B is (1/|A|) sum_{i in A, j in B} gamma_ij), emissions by
// u-weighted averages within groups. Identity groupings return the model
// unchanged.
ParameterVector merge_model(const ParameterVector& params, const StateGrouping& grouping,
                            const std::vector<double>& state_weights);

struct FitOptions {
  int max_iterations = 500;
  double objective_tol = 1e-6;  // relative improvement stop rule
  InnerOptions inner;
  // after convergence, try tying the smallest unfused gap and keep the tie
  // when the penalized objective strictly improves
  bool fusion_polish = true;
};

struct DPMLEFit {
  ParameterVector params;              // converged, at the order of the init
  std::vector<double> objective_trace; // penalized objective per iteration
  int n_hat = 0;
  std::vector<std::size_t> ordering;   // final GSF ordering
  StateGrouping grouping;
  ParameterVector merged;              // order n_hat
  double loglik = 0.0;                 // unpenalized, at converged params
  double merged_loglik = 0.0;          // unpenalized, at the merged model
  double penalized_objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> state_weights;
};

// The double-penalized fit: alternates the E-step, the transition M-step,
// unpenalized emission updates and the LLA-penalized mean update, re-deriving
// the GSF ordering every iteration, then counts distinct states and merges.
DPMLEFit fit_dpmle(const ObservationSet& obs, const PenaltyConfig& penalty,
                   const ParameterVector& init, const FitOptions& opts = {});

struct EMFit {
  ParameterVector params;
  double loglik = 0.0;
  std::vector<double> trace;
  int iterations = 0;
  bool converged = false;
};

// Unpenalized maximum-likelihood EM (the AIC/BIC baseline and the DPMLE
// initializer). Stationary models keep delta tied to pi(Gamma).
EMFit fit_em(const ObservationSet& obs, const ParameterVector& init,
             const FitOptions& opts = {});

// Penalized objective: loglik + c_n sum_j log pi_j - sum_l p_lambda(eta_l).
// pi is the stationary law of the tpm for stationary models and the
// occupancy estimate otherwise. The SCAD sample-size weight is the total
// observation count.
double penalized_objective(const ObservationSet& obs, const ParameterVector& params,
                           const PenaltyConfig& penalty);

}  // namespace dpmle

#endif
