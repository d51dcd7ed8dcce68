#ifndef DPMLE_BENCHMARK_HPP
#define DPMLE_BENCHMARK_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dpmle/scenarios.hpp"
#include "dpmle/selection.hpp"

namespace dpmle {

// One benchmark grid: methods x scenarios x replicates at a fixed T.
struct BenchmarkConfig {
  std::vector<int> scenarios{1};
  std::vector<std::string> methods{"aic", "bic", "dpmle"};  // + aic_cov, bic_cov, dpmle_cov
  std::size_t T = 5000;
  std::size_t M = 0;  // 0 = scenario default
  int replicates = 20;
  std::vector<int> orders{2, 3, 4};
  int n_upper = 4;
  int true_order = 3;
  int restarts = 10;        // baseline EM restarts per order
  int draws = 20;           // hyperparameter draws per DPMLE search
  int dpmle_restarts = 6;
  std::uint64_t seed = 1;
  int threads = 0;          // 0 = hardware concurrency
  FitOptions fit;

  void validate() const;
};

struct BenchmarkCell {
  std::string method;
  int scenario = 0;
  std::size_t T = 0;
  std::map<int, int> order_counts;  // selected order -> count
  int failures = 0;
  double success_rate = 0.0;        // at the true order
  double wall_seconds_total = 0.0;
  double wall_seconds_mean = 0.0;
};

struct ReplicateOutcome {
  int scenario = 0;
  int replicate = 0;
  std::string method;
  int selected_order = 0;  // 0 on failure
  bool failed = false;
  std::string error;
  double wall_seconds = 0.0;
};

struct BenchmarkReport {
  BenchmarkConfig config;
  std::vector<ReplicateOutcome> outcomes;
  std::vector<BenchmarkCell> cells;

  std::string table() const;  // success-rate table, one row per method/scenario
};

// Runs the grid. Replicates are independent and scheduled over a small worker
// pool; outcomes land in preassigned slots, so results are deterministic for
// a given seed regardless of the thread count.
BenchmarkReport run_benchmark(const BenchmarkConfig& config);

// Long-format rows (method, scenario, T, order, count) for plotting.
std::vector<std::vector<std::string>> benchmark_long_rows(const BenchmarkReport& report);

}  // namespace dpmle

#endif
