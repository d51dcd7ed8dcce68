#ifndef DPMLE_HMM_HPP
#define DPMLE_HMM_HPP

#include <vector>

#include "dpmle/emissions.hpp"
#include "dpmle/matrix.hpp"
#include "dpmle/observations.hpp"
#include "dpmle/transitions.hpp"

namespace dpmle {

// Initial-distribution handling: tied to the stationary distribution of the
// tpm, or estimated as a free simplex vector (non-stationary models).
enum class DeltaMode { Stationary, Free };

struct ParameterVector {
  std::vector<double> delta;
  TransitionModel transition;
  EmissionParams emissions;
  DeltaMode delta_mode = DeltaMode::Stationary;

  std::size_t order() const { return delta.size(); }
  void validate() const;
};

// Log-space forward/backward values and smoothed state probabilities for one
// series. For every t, logsumexp_j(log_alpha(t,j) + log_beta(t,j)) equals the
// series log-likelihood.
struct SeriesFB {
  Matrix log_alpha;   // T x N
  Matrix log_beta;    // T x N
  Matrix posterior;   // T x N, rows sum to 1
  double loglik = 0.0;
};

struct FBResult {
  std::vector<SeriesFB> series;
  double total_loglik = 0.0;
};

FBResult forward_backward(const ObservationSet& obs, const ParameterVector& params);

// Total log-likelihood via the scaled forward pass only.
double log_likelihood(const ObservationSet& obs, const ParameterVector& params);

// Most likely state path per series (0-based states); ties break toward the
// lower state index.
std::vector<std::vector<int>> viterbi(const ObservationSet& obs, const ParameterVector& params);

// Time-averaged posterior state probabilities, pooled across individuals
// weighted by series length.
std::vector<double> occupancy_estimate(const ObservationSet& obs, const ParameterVector& params);

}  // namespace dpmle

#endif
