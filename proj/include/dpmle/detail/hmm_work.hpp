#ifndef DPMLE_DETAIL_HMM_WORK_HPP
#define DPMLE_DETAIL_HMM_WORK_HPP

#include <cstdint>
#include <map>
#include <vector>

#include "dpmle/hmm.hpp"

namespace dpmle::detail {

// Covariate rows deduplicated per series. Scenario covariates repeat with a
// short period, so tpms are computed once per distinct row instead of per t.
// Convention: the tpm applied to the transition into time t uses the
// covariate row at t.
struct CovKeys {
  std::vector<std::uint32_t> key;             // length T
  std::vector<std::vector<double>> rows;      // distinct rows
};

CovKeys build_cov_keys(const Series& s);

// tpm per distinct covariate row (single entry for homogeneous models).
std::vector<Matrix> tpms_for(const TransitionModel& model, const CovKeys& keys);

// log f_j(y_t), row-major T x N.
void emission_log_densities(const Series& s, const EmissionParams& em, std::vector<double>& logf);

// Scaled forward/backward quantities for one series:
//   alpha_bar rows sum to 1,  log alpha(t,j) = logz[t] + log alpha_bar(t,j)
//   beta_bar rows sum to 1,   log beta(t,j)  = logw[t] + log beta_bar(t,j)
struct FBWork {
  std::size_t T = 0, N = 0;
  std::vector<double> alpha_bar, beta_bar;  // T x N
  std::vector<double> logz, logw;           // length T
  std::vector<double> cmax;                 // per-t shift of log densities
  double loglik = 0.0;

  double alpha(std::size_t t, std::size_t j) const { return alpha_bar[t * N + j]; }
  double beta(std::size_t t, std::size_t j) const { return beta_bar[t * N + j]; }
};

// Runs the scaled recursions. series_id / logf / keys / tpms must be
// consistent. Throws underflow_error when every state has zero density.
void scaled_forward(const std::string& series_id, const std::vector<double>& logf,
                    std::size_t T, std::size_t N, const std::vector<double>& delta,
                    const std::vector<Matrix>& tpms, const CovKeys& keys, FBWork& w);
void scaled_backward(const std::vector<double>& logf, std::size_t T, std::size_t N,
                     const std::vector<Matrix>& tpms, const CovKeys& keys, FBWork& w);

}  // namespace dpmle::detail

#endif
