#ifndef DPMLE_SCENARIOS_HPP
#define DPMLE_SCENARIOS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "dpmle/matrix.hpp"
#include "dpmle/observations.hpp"

namespace dpmle {

// Generator settings for the six misspecification scenarios:
//   1 benchmark; 2 outliers; 3 heterogeneity in the hidden process;
//   4 heterogeneity in the observed process; 5 autocorrelated emission means;
//   6 temporal variation in the transition probabilities.
struct ScenarioConfig {
  int scenario = 1;
  std::size_t T = 5000;
  std::size_t M = 0;  // 0: scenario default (1 for 1/2/6, 10 for 3/4/5)
  std::uint64_t seed = 1;

  // three-state gamma baseline
  std::vector<double> means{1.0, 3.0, 5.5};
  std::vector<double> shapes{1.5, 4.0, 12.0};
  double tpm_diag = 0.8;

  // scenario 2: additive uniform errors on a fixed fraction of points
  double outlier_frac = 0.005;
  double outlier_lo = 10.0;
  double outlier_hi = 20.0;

  // scenario 3: two-component mixture over tpms
  std::vector<double> mixture_weights{0.5, 0.5};

  // scenario 4: per-individual state-3 mean, log-normal on the log scale
  double lognormal_logmean = 1.7047480922384253;  // log(5.5)
  double lognormal_variance = 0.15;

  // scenario 5: AR(1) path on the state-1 mean
  double ar_persistence = 0.85;
  double ar_stationary_sd_frac = 0.15;  // stationary sd as fraction of the base mean
  double mean_floor = 0.05;

  // scenario 6: cosinor transition logits at 15-minute resolution
  int steps_per_day = 96;
  double cosinor_cos_amp = 1.0;
  double cosinor_sin_amp = 1.0;

  std::size_t individuals() const {
    if (M > 0) return M;
    return (scenario >= 3 && scenario <= 5) ? 10 : 1;
  }

  void validate() const;
};

struct ScenarioTruth {
  std::vector<std::vector<int>> state_paths;          // 0-based, per individual
  std::vector<int> mixture_component;                 // scenario 3, per individual
  std::vector<double> state3_means;                   // scenario 4, per individual
  std::vector<std::vector<double>> state1_mean_paths; // scenario 5, per individual
  std::vector<std::size_t> contaminated;              // scenario 2, pooled flat indices
  Matrix tpm;                                         // base generator tpm
  Matrix tpm_component2;                              // scenario 3 second component
};

struct SimulatedData {
  ObservationSet obs;
  ScenarioTruth truth;
};

// Generates the scenario; bit-identical for identical config and seed. The
// emitted observation set has one channel "y" plus a time-of-day covariate
// "tod" (the linear index 1..steps_per_day, repeating).
SimulatedData simulate(const ScenarioConfig& config);

// Generator self-checks: empirical emission moments, transition frequencies
// and occupancy against the configuration. NaN marks cells with too little
// data to estimate.
struct EmpiricalReport {
  std::vector<double> state_emp_mean;     // per state
  std::vector<double> state_emp_shape;    // method-of-moments mean^2/var
  std::vector<std::size_t> state_counts;
  Matrix transition_freq;
  std::vector<Matrix> component_transition_freq;  // scenario 3, per component
  std::vector<double> occupancy;
  std::vector<std::vector<double>> occupancy_by_phase;  // scenario 6: phase x state
  std::string to_string() const;
};

EmpiricalReport empirical_checks(const SimulatedData& data, const ScenarioConfig& config);

}  // namespace dpmle

#endif
