#include "dpmle/benchmark.hpp"

#include <algorithm>
#include <chrono>
#include <mutex>
#include <sstream>
#include <thread>

#include "dpmle/errors.hpp"

namespace dpmle {

void BenchmarkConfig::validate() const {
  if (replicates < 1) throw config_error("benchmark: replicates must be >= 1");
  if (scenarios.empty()) throw config_error("benchmark: scenario list is empty");
  if (methods.empty()) throw config_error("benchmark: method list is empty");
  for (int s : scenarios)
    if (s < 1 || s > 6) throw config_error("benchmark: scenario must be in 1..6");
  static const char* known[] = {"aic", "bic", "dpmle", "aic_cov", "bic_cov", "dpmle_cov"};
  for (const auto& m : methods) {
    bool ok = false;
    for (const char* k : known) ok = ok || m == k;
    if (!ok) throw config_error("benchmark: unknown method '" + m + "'");
  }
  if (orders.empty()) throw config_error("benchmark: order list is empty");
  if (draws < 1) throw config_error("benchmark: draws must be >= 1");
}

namespace {

bool is_cov_method(const std::string& m) { return m.size() > 4 && m.ends_with("_cov"); }

// Work unit: every method is evaluated on the same generated dataset.
struct Task {
  int scenario = 0;
  int replicate = 0;
};

void run_replicate(const BenchmarkConfig& cfg, const Task& task,
                   std::vector<ReplicateOutcome>& out, std::size_t slot) {
  ScenarioConfig scen;
  scen.scenario = task.scenario;
  scen.T = cfg.T;
  scen.M = cfg.M;
  scen.seed = cfg.seed * 1000003ULL + static_cast<std::uint64_t>(task.scenario) * 1009ULL +
              static_cast<std::uint64_t>(task.replicate);
  SimulatedData sim = simulate(scen);
  const EmissionSpec spec{{Family::Gamma}};

  // baseline order selection shared by aic/bic variants and the dpmle init
  std::map<bool, OrderSelectResult> baselines;
  auto baseline_for = [&](bool cov) -> OrderSelectResult& {
    auto it = baselines.find(cov);
    if (it != baselines.end()) return it->second;
    OrderSelectOptions oso;
    oso.restarts = cfg.restarts;
    oso.nonstationary = cov;
    oso.fit = cfg.fit;
    auto res = ic_order_select(sim.obs, cfg.orders, spec, oso,
                               scen.seed * 13ULL + (cov ? 7ULL : 1ULL));
    return baselines.emplace(cov, std::move(res)).first->second;
  };

  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
    const std::string& method = cfg.methods[mi];
    ReplicateOutcome& o = out[slot + mi];
    o.scenario = task.scenario;
    o.replicate = task.replicate;
    o.method = method;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const bool cov = is_cov_method(method);
      if (method == "aic" || method == "aic_cov") {
        o.selected_order = baseline_for(cov).aic_report.best().order;
      } else if (method == "bic" || method == "bic_cov") {
        o.selected_order = baseline_for(cov).bic_report.best().order;
      } else {
        NicSearchOptions nso;
        nso.draws = cfg.draws;
        nso.dpmle_restarts = cfg.dpmle_restarts;
        nso.init_restarts = cfg.restarts;
        nso.nonstationary = cov;
        nso.fit = cfg.fit;
        // reuse the baseline fit at the order bound as the initializer
        const auto& base = baseline_for(cov);
        for (std::size_t oi = 0; oi < cfg.orders.size(); ++oi)
          if (cfg.orders[oi] == cfg.n_upper) nso.init = base.best_fits[oi].params;
        const auto res = nic_search(sim.obs, cfg.n_upper, spec, nso, scen.seed * 7ULL + 5ULL);
        o.selected_order = res.best_fit.n_hat;
      }
    } catch (const error& e) {
      o.failed = true;
      o.error = e.what();
    }
    o.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
}

}  // namespace

BenchmarkReport run_benchmark(const BenchmarkConfig& cfg) {
  cfg.validate();
  BenchmarkReport report;
  report.config = cfg;

  std::vector<Task> tasks;
  for (int s : cfg.scenarios)
    for (int r = 0; r < cfg.replicates; ++r) tasks.push_back({s, r});
  report.outcomes.assign(tasks.size() * cfg.methods.size(), {});

  const unsigned hw = std::thread::hardware_concurrency();
  const unsigned n_threads =
      cfg.threads > 0 ? static_cast<unsigned>(cfg.threads) : std::max(1u, hw);
  std::mutex queue_mutex;
  std::size_t next = 0;

  auto worker = [&]() {
    for (;;) {
      std::size_t idx;
      {
        std::lock_guard<std::mutex> lock(queue_mutex);
        if (next >= tasks.size()) return;
        idx = next++;
      }
      run_replicate(cfg, tasks[idx], report.outcomes, idx * cfg.methods.size());
    }
  };
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  // aggregate
  for (int s : cfg.scenarios) {
    for (const auto& method : cfg.methods) {
      BenchmarkCell cell;
      cell.method = method;
      cell.scenario = s;
      cell.T = cfg.T;
      int n = 0;
      for (const auto& o : report.outcomes) {
        if (o.scenario != s || o.method != method) continue;
        ++n;
        cell.wall_seconds_total += o.wall_seconds;
        if (o.failed) {
          ++cell.failures;
          continue;
        }
        cell.order_counts[o.selected_order]++;
      }
      cell.success_rate =
          n > 0 ? static_cast<double>(cell.order_counts[cfg.true_order]) / n : 0.0;
      cell.wall_seconds_mean = n > 0 ? cell.wall_seconds_total / n : 0.0;
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

std::string BenchmarkReport::table() const {
  std::ostringstream os;
  os << "scenario  method     ";
  for (int o : config.orders) os << " N=" << o << "   ";
  os << "success  fail  mean_s\n";
  for (const auto& c : cells) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-9d %-10s", c.scenario, c.method.c_str());
    os << buf;
    for (int o : config.orders) {
      const auto it = c.order_counts.find(o);
      std::snprintf(buf, sizeof(buf), " %-5d", it == c.order_counts.end() ? 0 : it->second);
      os << buf;
    }
    std::snprintf(buf, sizeof(buf), " %6.1f%%  %-4d  %.1f\n", 100.0 * c.success_rate, c.failures,
                  c.wall_seconds_mean);
    os << buf;
  }
  return os.str();
}

std::vector<std::vector<std::string>> benchmark_long_rows(const BenchmarkReport& report) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& c : report.cells) {
    for (const auto& [order, count] : c.order_counts) {
      rows.push_back({c.method, std::to_string(c.scenario), std::to_string(c.T),
                      std::to_string(order), std::to_string(count)});
    }
  }
  return rows;
}

}  // namespace dpmle
