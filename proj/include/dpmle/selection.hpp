#ifndef DPMLE_SELECTION_HPP
#define DPMLE_SELECTION_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dpmle/penalized_em.hpp"
#include "dpmle/rng.hpp"

namespace dpmle {

// k = dim(theta_1)*N + N(N-1); non-stationary models multiply the transition
// block by (C+1) and add N-1 free initial probabilities.
int num_params(int n_hat, int emission_dim, int covariate_count, bool nonstationary);

double aic(double loglik, int k);
double bic(double loglik, int k, double n);
double nic(double loglik, int k, double n);

struct CandidateRecord {
  int order = 0;
  double lambda = 0.0;  // hyperparameter candidates only
  double c_n = 0.0;
  double loglik = 0.0;
  int k = 0;
  double criterion = 0.0;
};

struct CriterionReport {
  std::string method;  // AIC | BIC | NIC | ...
  std::vector<CandidateRecord> candidates;
  std::size_t selected = 0;  // index into candidates

  const CandidateRecord& best() const { return candidates[selected]; }
};

// Channel family layout used to build random initial values.
enum class Family { Gamma, Normal, VonMises };

struct EmissionSpec {
  std::vector<Family> families;  // one per channel
  int dim_theta1() const { return static_cast<int>(2 * families.size()); }
};

struct OrderSelectOptions {
  int restarts = 150;
  bool nonstationary = false;
  FitOptions fit;
};

// Draws a random starting parameter vector: emission means at stratified data
// quantiles with jitter, shapes/concentrations log-uniform in [0.5, 20], tpm
// diagonal uniform in [0.6, 0.95].
ParameterVector random_init(const ObservationSet& obs, const EmissionSpec& spec, int order,
                            bool nonstationary, Rng& rng);

struct OrderSelectResult {
  CriterionReport aic_report;
  CriterionReport bic_report;
  // best unpenalized fit per order, in the order of the `orders` argument
  std::vector<EMFit> best_fits;
};

// Fits the unpenalized model for every order from `restarts` random starts,
// keeps the best log-likelihood, and scores AIC/BIC.
OrderSelectResult ic_order_select(const ObservationSet& obs, const std::vector<int>& orders,
                                  const EmissionSpec& spec, const OrderSelectOptions& opts,
                                  std::uint64_t seed);

struct PenaltyBounds {
  double log_mlambda_lo = 1.0;  // bounds for log(M * lambda)
  double log_mlambda_hi = 5.0;
  double c_n_lo = 1.0;
  double c_n_hi = 5.0;
};

// Which log-likelihood NIC scores: the converged full-order parameter vector,
// or the merged model re-evaluated at order n_hat.
enum class NicLoglik { Converged, Merged };

struct NicSearchOptions {
  int draws = 50;
  int init_restarts = 10;  // restarts for the MLE initializer
  // penalized-fit starts per draw: the MLE initializer plus alternating
  // jittered and fresh random starts
  int dpmle_restarts = 6;
  double jitter_sd = 0.1;  // relative jitter applied to restart means
  PenaltyBounds bounds;
  NicLoglik loglik_source = NicLoglik::Converged;
  double merge_tol = 1e-3;
  bool nonstationary = false;
  FitOptions fit;
  // optional precomputed initializer (order n_upper); empty delta = unset
  ParameterVector init;
};

struct NicSearchResult {
  PenaltyConfig best_penalty;
  DPMLEFit best_fit;
  CriterionReport report;
};

// Random search over (lambda, C_N): draws log(M*lambda) and C_N uniformly in
// the bounds, runs the double-penalized fit per pair, and keeps the pair
// minimizing the BIC-type criterion on the resulting fit. Ties break toward
// smaller k, then smaller lambda.
NicSearchResult nic_search(const ObservationSet& obs, int n_upper, const EmissionSpec& spec,
                           const NicSearchOptions& opts, std::uint64_t seed);

}  // namespace dpmle

#endif
