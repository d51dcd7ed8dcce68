// Command-line front end: simulation, preprocessing, fitting, order-selection
// benchmarks and report formatting. Exit codes: 0 ok, 2 configuration,
// 3 parse, 4 convergence, 5 I/O, 1 unexpected.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dpmle/benchmark.hpp"
#include "dpmle/csvio.hpp"
#include "dpmle/errors.hpp"
#include "dpmle/json_io.hpp"
#include "dpmle/movement.hpp"
#include "dpmle/scenarios.hpp"
#include "dpmle/selection.hpp"

namespace {

using namespace dpmle;
using nlohmann::json;

std::string default_out_dir() {
  const char* env = std::getenv("DPMLE_OUT_DIR");
  return env != nullptr && *env != '\0' ? env : ".";
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
  if (!out) throw io_error("failed while writing '" + path + "'");
}

// --channels gamma:y,vonmises:angle_rad
struct ChannelArg {
  std::vector<ChannelSpec> specs;
  std::vector<Family> families;
};

ChannelArg parse_channels(const std::string& arg) {
  ChannelArg out;
  std::stringstream ss(arg);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos)
      throw config_error("channel spec '" + item + "' must be family:column");
    const std::string fam = item.substr(0, colon);
    const std::string col = item.substr(colon + 1);
    if (fam == "gamma") {
      out.families.push_back(Family::Gamma);
      out.specs.push_back({col, ChannelKind::Linear});
    } else if (fam == "normal") {
      out.families.push_back(Family::Normal);
      out.specs.push_back({col, ChannelKind::Real});
    } else if (fam == "vonmises") {
      out.families.push_back(Family::VonMises);
      out.specs.push_back({col, ChannelKind::Angle});
    } else {
      throw config_error("unknown emission family '" + fam + "'");
    }
  }
  if (out.specs.empty()) throw config_error("at least one channel is required");
  return out;
}

// ---------------------------------------------------------------------------

int cmd_simulate(int scenario, std::size_t T, std::size_t M, std::uint64_t seed,
                 const std::string& out_dir, std::string out_data, std::string out_truth) {
  ScenarioConfig cfg;
  cfg.scenario = scenario;
  cfg.T = T;
  cfg.M = M;
  cfg.seed = seed;
  const SimulatedData sim = simulate(cfg);

  if (out_data.empty())
    out_data = join_path(out_dir, "scenario" + std::to_string(scenario) + "_data.csv");
  if (out_truth.empty())
    out_truth = join_path(out_dir, "scenario" + std::to_string(scenario) + "_truth.json");
  write_observations_csv(out_data, sim.obs);
  write_json_file(out_truth, truth_to_json(cfg, sim.truth));

  std::cout << "wrote " << out_data << " (" << sim.obs.total_length() << " rows, "
            << sim.obs.series.size() << " series)\n"
            << "wrote " << out_truth << "\n";
  return 0;
}

int cmd_preprocess(const std::string& input, std::string output, const std::string& out_dir,
                   const SplitOptions& opts) {
  const auto tracks = read_tracks_csv(input);
  if (output.empty()) output = join_path(out_dir, "steps.csv");

  std::vector<StepAngleSeries> all;
  std::size_t dropped_tracks = 0;
  std::cout << "track  segments  kept_hours  fixes  missing_frac\n";
  for (const auto& track : tracks) {
    const HourlyTrack hourly = regularize_hourly(track);
    const auto segments = split_segments(hourly, opts);
    if (segments.empty()) ++dropped_tracks;
    for (const auto& seg : segments) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%-6s %-9s %-11zu %-6zu %.3f\n", track.id.c_str(),
                    seg.id.c_str(), seg.hours.size(), seg.fix_count(), seg.missing_fraction());
      std::cout << buf;
      all.push_back(steps_and_angles(seg));
    }
  }
  write_step_angle_csv(output, all);
  std::cout << "segments kept: " << all.size() << "; tracks with no usable segment: "
            << dropped_tracks << "\nwrote " << output << "\n";
  return 0;
}

struct FitArgs {
  std::string input;
  std::string method = "mle";
  std::string channels = "gamma:y";
  std::vector<std::string> covariates;
  bool nonstationary = false;
  std::vector<int> orders{2, 3, 4};
  int n_upper = 4;
  int restarts = 30;
  int dpmle_restarts = 6;
  int draws = 50;
  double log_mlambda_lo = 1.0, log_mlambda_hi = 5.0;
  double c_n_lo = 1.0, c_n_hi = 5.0;
  std::uint64_t seed = 0;
  std::string output;
  std::string out_dir;
  int max_iterations = 500;
  double tolerance = 1e-6;
  bool dump_posterior = false;
};

int cmd_fit(const FitArgs& a) {
  const ChannelArg channels = parse_channels(a.channels);
  if (a.nonstationary && a.covariates.empty())
    throw config_error("non-stationary fits need at least one covariate column");
  const ObservationSet obs = read_observations_csv(a.input, channels.specs, a.covariates);
  const EmissionSpec spec{channels.families};

  FitOptions fo;
  fo.max_iterations = a.max_iterations;
  fo.objective_tol = a.tolerance;

  json out;
  out["method"] = a.method;
  out["input"] = a.input;
  out["seed"] = a.seed;
  out["nonstationary"] = a.nonstationary;
  out["n_observations"] = obs.total_length();
  {
    json chs = json::array();
    for (const auto& c : channels.specs) chs.push_back(c.name);
    out["channels"] = std::move(chs);
    out["covariates"] = a.covariates;
  }

  ParameterVector decoded_params;
  if (a.method == "mle") {
    OrderSelectOptions oso;
    oso.restarts = a.restarts;
    oso.nonstationary = a.nonstationary;
    oso.fit = fo;
    const auto sel = ic_order_select(obs, a.orders, spec, oso, a.seed);
    json orders = json::array();
    for (std::size_t i = 0; i < sel.aic_report.candidates.size(); ++i) {
      const auto& c = sel.aic_report.candidates[i];
      orders.push_back({{"order", c.order},
                        {"loglik", c.loglik},
                        {"k", c.k},
                        {"aic", c.criterion},
                        {"bic", sel.bic_report.candidates[i].criterion},
                        {"converged", sel.best_fits[i].converged},
                        {"iterations", sel.best_fits[i].iterations}});
    }
    out["orders"] = std::move(orders);
    out["selected"] = {{"aic_order", sel.aic_report.best().order},
                       {"bic_order", sel.bic_report.best().order}};
    // decode with the BIC winner
    decoded_params = sel.best_fits[sel.bic_report.selected].params;
    out["best_params"] = to_json(decoded_params);
  } else if (a.method == "dpmle") {
    NicSearchOptions nso;
    nso.draws = a.draws;
    nso.init_restarts = a.restarts;
    nso.dpmle_restarts = a.dpmle_restarts;
    nso.bounds = {a.log_mlambda_lo, a.log_mlambda_hi, a.c_n_lo, a.c_n_hi};
    nso.nonstationary = a.nonstationary;
    nso.fit = fo;
    const auto res = nic_search(obs, a.n_upper, spec, nso, a.seed);
    json d = to_json(res.best_fit);
    d["penalty"] = {{"lambda", res.best_penalty.lambda},
                    {"c_n", res.best_penalty.c_n},
                    {"a", res.best_penalty.a}};
    d["nic"] = res.report.best().criterion;
    out["dpmle"] = std::move(d);
    out["search"] = to_json(res.report);
    decoded_params = res.best_fit.params;
  } else {
    throw config_error("method must be 'mle' or 'dpmle'");
  }

  // decoded states (1-based)
  {
    const auto paths = viterbi(obs, decoded_params);
    const auto fb = forward_backward(obs, decoded_params);
    json vit = json::array(), post_mode = json::array(), post = json::array();
    for (std::size_t m = 0; m < paths.size(); ++m) {
      json v = json::array(), pm = json::array(), pp = json::array();
      for (std::size_t t = 0; t < paths[m].size(); ++t) {
        v.push_back(paths[m][t] + 1);
        std::size_t arg = 0;
        for (std::size_t j = 1; j < decoded_params.order(); ++j)
          if (fb.series[m].posterior(t, j) > fb.series[m].posterior(t, arg)) arg = j;
        pm.push_back(arg + 1);
        if (a.dump_posterior) {
          json row = json::array();
          for (std::size_t j = 0; j < decoded_params.order(); ++j)
            row.push_back(fb.series[m].posterior(t, j));
          pp.push_back(std::move(row));
        }
      }
      vit.push_back(std::move(v));
      post_mode.push_back(std::move(pm));
      if (a.dump_posterior) post.push_back(std::move(pp));
    }
    out["decoded"] = {{"viterbi", std::move(vit)}, {"posterior_mode", std::move(post_mode)}};
    if (a.dump_posterior) out["decoded"]["posterior"] = std::move(post);
  }

  std::string output = a.output;
  if (output.empty()) output = join_path(a.out_dir, "fit.json");
  write_json_file(output, out);
  std::cout << "wrote " << output << "\n";
  return 0;
}

struct BenchmarkArgs {
  BenchmarkConfig cfg;
  std::string out_prefix;
  std::string out_dir;
  bool dry_run = false;
};

int cmd_benchmark(const BenchmarkArgs& a) {
  a.cfg.validate();
  std::size_t n_fits = a.cfg.scenarios.size() * static_cast<std::size_t>(a.cfg.replicates) *
                       a.cfg.methods.size();
  std::cout << "benchmark plan: " << a.cfg.scenarios.size() << " scenario(s) x "
            << a.cfg.replicates << " replicate(s) x " << a.cfg.methods.size()
            << " method(s) = " << n_fits << " runs, T=" << a.cfg.T << ", seed=" << a.cfg.seed
            << "\n";
  if (a.dry_run) {
    std::cout << "dry run: configuration accepted, nothing executed\n";
    return 0;
  }
  const BenchmarkReport report = run_benchmark(a.cfg);

  std::string prefix = a.out_prefix;
  if (prefix.empty()) prefix = join_path(a.out_dir, "benchmark");
  const std::string json_path = prefix + "_report.json";
  const std::string wide_path = prefix + "_table.txt";
  const std::string long_path = prefix + "_long.csv";
  write_json_file(json_path, report_to_json(report));
  {
    std::ofstream t(wide_path);
    if (!t) throw io_error("cannot write '" + wide_path + "'");
    t << report.table();
  }
  write_csv(long_path, {"method", "scenario", "T", "order", "count"},
            benchmark_long_rows(report));
  std::cout << report.table();
  std::cout << "wrote " << json_path << ", " << wide_path << ", " << long_path << "\n";
  int failures = 0;
  for (const auto& o : report.outcomes) failures += o.failed ? 1 : 0;
  if (failures > 0) std::cout << failures << " replicate run(s) failed; see the JSON report\n";
  return 0;
}

int cmd_report(const std::string& input) {
  const CsvTable t = read_csv(input);
  const int mcol = t.column("method"), scol = t.column("scenario"), tcol = t.column("T"),
            ocol = t.column("order"), ccol = t.column("count");
  if (mcol < 0 || scol < 0 || tcol < 0 || ocol < 0 || ccol < 0)
    throw parse_error("'" + input + "': expected columns method,scenario,T,order,count");
  std::map<std::pair<std::string, std::string>, std::map<int, int>> cells;
  std::set<int> orders;
  for (const auto& row : t.rows) {
    const int order = std::stoi(row[ocol]);
    orders.insert(order);
    cells[{row[scol] + "/T=" + row[tcol], row[mcol]}][order] += std::stoi(row[ccol]);
  }
  std::cout << "scenario/T        method      ";
  for (int o : orders) std::cout << "N=" << o << "   ";
  std::cout << "\n";
  for (const auto& [key, counts] : cells) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%-17s %-11s", key.first.c_str(), key.second.c_str());
    std::cout << buf;
    for (int o : orders) {
      const auto it = counts.find(o);
      std::snprintf(buf, sizeof(buf), " %-5d", it == counts.end() ? 0 : it->second);
      std::cout << buf;
    }
    std::cout << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Penalized order selection and fitting for hidden Markov models"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a key=value config file");

  std::string out_dir = default_out_dir();
  app.add_option("--out-dir", out_dir, "Default output directory (env DPMLE_OUT_DIR)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate a misspecification scenario dataset");
  int scenario = 1;
  std::size_t T = 5000, M = 0;
  std::uint64_t seed = 0;
  std::string out_data, out_truth;
  sim->add_option("--scenario", scenario, "Scenario id 1..6")->required();
  sim->add_option("--T", T, "Series length");
  sim->add_option("--M", M, "Individuals (0 = scenario default)");
  sim->add_option("--seed", seed, "RNG seed")->required();
  sim->add_option("--out-data", out_data, "Data CSV path");
  sim->add_option("--out-truth", out_truth, "Truth JSON path");

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "Regularize, split and derive steps/angles");
  std::string pre_input, pre_output;
  SplitOptions split_opts;
  pre->add_option("--input", pre_input, "Raw track CSV (id,timestamp,lat,lon[,cov...])")
      ->required();
  pre->add_option("--output", pre_output, "Output CSV path");
  pre->add_option("--gap-hours", split_opts.gap_hours, "Split after more than this many missing hours");
  pre->add_option("--min-length", split_opts.min_len, "Minimum fixes per kept segment");
  pre->add_option("--max-missing", split_opts.max_missing_frac, "Maximum missing fraction");

  // fit
  auto* fit = app.add_subcommand("fit", "Fit by plain maximum likelihood or the penalized method");
  FitArgs fa;
  fit->add_option("--input", fa.input, "Observation CSV")->required();
  fit->add_option("--method", fa.method, "mle | dpmle");
  fit->add_option("--channels", fa.channels, "family:column[,family:column...]");
  fit->add_option("--covariates", fa.covariates, "Covariate column names")->delimiter(',');
  fit->add_flag("--nonstationary", fa.nonstationary, "Covariate-dependent transitions");
  fit->add_option("--orders", fa.orders, "Candidate orders (mle)")->delimiter(',');
  fit->add_option("--n-upper", fa.n_upper, "Order bound (dpmle)");
  fit->add_option("--restarts", fa.restarts, "Random restarts for baseline fits");
  fit->add_option("--dpmle-restarts", fa.dpmle_restarts, "Penalized-fit starts per draw");
  fit->add_option("--draws", fa.draws, "Hyperparameter draws");
  fit->add_option("--log-mlambda-lo", fa.log_mlambda_lo, "Lower bound for log(n*lambda)");
  fit->add_option("--log-mlambda-hi", fa.log_mlambda_hi, "Upper bound for log(n*lambda)");
  fit->add_option("--cn-lo", fa.c_n_lo, "Lower bound for C_N");
  fit->add_option("--cn-hi", fa.c_n_hi, "Upper bound for C_N");
  fit->add_option("--seed", fa.seed, "RNG seed")->required();
  fit->add_option("--output", fa.output, "Output JSON path");
  fit->add_option("--max-iterations", fa.max_iterations, "EM iteration cap");
  fit->add_option("--tolerance", fa.tolerance, "Relative objective tolerance");
  fit->add_flag("--dump-posterior", fa.dump_posterior, "Include the full posterior matrix");

  // benchmark
  auto* bench = app.add_subcommand("benchmark", "Success-rate grid over scenarios and methods");
  BenchmarkArgs ba;
  bench->add_option("--scenarios", ba.cfg.scenarios, "Scenario ids")->delimiter(',');
  bench->add_option("--methods", ba.cfg.methods,
                    "aic,bic,dpmle,aic_cov,bic_cov,dpmle_cov")->delimiter(',');
  bench->add_option("--T", ba.cfg.T, "Series length");
  bench->add_option("--M", ba.cfg.M, "Individuals (0 = scenario default)");
  bench->add_option("--replicates", ba.cfg.replicates, "Replicates per scenario");
  bench->add_option("--orders", ba.cfg.orders, "Baseline candidate orders")->delimiter(',');
  bench->add_option("--n-upper", ba.cfg.n_upper, "Order bound for the penalized method");
  bench->add_option("--restarts", ba.cfg.restarts, "Baseline restarts per order");
  bench->add_option("--draws", ba.cfg.draws, "Hyperparameter draws per search");
  bench->add_option("--dpmle-restarts", ba.cfg.dpmle_restarts, "Penalized-fit starts per draw");
  bench->add_option("--seed", ba.cfg.seed, "RNG seed")->required();
  bench->add_option("--threads", ba.cfg.threads, "Worker threads (0 = hardware)");
  bench->add_option("--out-prefix", ba.out_prefix, "Output path prefix");
  bench->add_flag("--dry-run", ba.dry_run, "Validate and print the plan only");

  // report
  auto* rep = app.add_subcommand("report", "Format a long-format benchmark CSV as a table");
  std::string rep_input;
  rep->add_option("--input", rep_input, "Long-format CSV")->required();

  try {
    app.parse(argc, argv);
    fa.out_dir = out_dir;
    ba.out_dir = out_dir;
    if (sim->parsed()) return cmd_simulate(scenario, T, M, seed, out_dir, out_data, out_truth);
    if (pre->parsed()) return cmd_preprocess(pre_input, pre_output, out_dir, split_opts);
    if (fit->parsed()) return cmd_fit(fa);
    if (bench->parsed()) return cmd_benchmark(ba);
    if (rep->parsed()) return cmd_report(rep_input);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const config_error& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const parse_error& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 3;
  } catch (const convergence_error& e) {
    std::cerr << "convergence error: " << e.what() << "\n";
    return 4;
  } catch (const io_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 5;
  } catch (const dpmle::error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
