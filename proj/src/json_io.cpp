#include "dpmle/json_io.hpp"

#include "dpmle/errors.hpp"

namespace dpmle {

using nlohmann::json;

json to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json to_json(const ChannelParams& p) {
  if (std::holds_alternative<GammaParams>(p)) {
    const auto& g = std::get<GammaParams>(p);
    return {{"family", "gamma"}, {"mean", g.mean}, {"shape", g.shape}};
  }
  if (std::holds_alternative<NormalParams>(p)) {
    const auto& n = std::get<NormalParams>(p);
    return {{"family", "normal"}, {"mean", n.mean}, {"sd", n.sd}};
  }
  const auto& v = std::get<VonMisesParams>(p);
  return {{"family", "vonmises"}, {"mean", v.mean}, {"kappa", v.kappa}};
}

json to_json(const ParameterVector& p) {
  json out;
  out["order"] = p.order();
  out["delta"] = p.delta;
  out["delta_mode"] = p.delta_mode == DeltaMode::Stationary ? "stationary" : "free";
  if (std::holds_alternative<Homogeneous>(p.transition)) {
    out["transition"] = {{"kind", "homogeneous"},
                         {"tpm", to_json(std::get<Homogeneous>(p.transition).gamma)}};
  } else if (std::holds_alternative<CovariateLogit>(p.transition)) {
    const auto& m = std::get<CovariateLogit>(p.transition);
    json cells = json::array();
    for (std::size_t i = 0; i < m.n_states; ++i)
      for (std::size_t j = 0; j < m.n_states; ++j) {
        if (i == j) continue;
        const double* b = m.cell(i, j);
        cells.push_back({{"from", i + 1},
                         {"to", j + 1},
                         {"coefficients", std::vector<double>(b, b + m.n_cov + 1)}});
      }
    out["transition"] = {{"kind", "covariate_logit"},
                         {"n_covariates", m.n_cov},
                         {"cells", std::move(cells)}};
  } else {
    const auto& m = std::get<MergedLogit>(p.transition);
    json groups = json::array();
    for (const auto& g : m.groups) {
      json grp = json::array();
      for (std::size_t i : g) grp.push_back(i + 1);
      groups.push_back(std::move(grp));
    }
    out["transition"] = {{"kind", "merged_logit"}, {"groups", std::move(groups)}};
  }
  json states = json::array();
  for (const auto& st : p.emissions.states) {
    json chs = json::array();
    for (const auto& ch : st) chs.push_back(to_json(ch));
    states.push_back(std::move(chs));
  }
  out["emissions"] = std::move(states);
  return out;
}

json to_json(const CriterionReport& r) {
  json cands = json::array();
  for (const auto& c : r.candidates) {
    cands.push_back({{"order", c.order},
                     {"lambda", c.lambda},
                     {"c_n", c.c_n},
                     {"loglik", c.loglik},
                     {"k", c.k},
                     {"criterion", c.criterion}});
  }
  return {{"method", r.method}, {"candidates", std::move(cands)}, {"selected", r.selected}};
}

json to_json(const DPMLEFit& fit) {
  json out;
  out["n_hat"] = fit.n_hat;
  out["loglik"] = fit.loglik;
  out["merged_loglik"] = fit.merged_loglik;
  out["penalized_objective"] = fit.penalized_objective;
  out["iterations"] = fit.iterations;
  out["converged"] = fit.converged;
  out["objective_trace"] = fit.objective_trace;
  out["params"] = to_json(fit.params);
  out["merged_params"] = to_json(fit.merged);
  json groups = json::array();
  for (const auto& g : fit.grouping.groups) {
    json grp = json::array();
    for (std::size_t i : g) grp.push_back(i + 1);
    groups.push_back(std::move(grp));
  }
  out["groups"] = std::move(groups);
  return out;
}

json truth_to_json(const ScenarioConfig& cfg, const ScenarioTruth& truth) {
  json out;
  out["scenario"] = cfg.scenario;
  out["T"] = cfg.T;
  out["M"] = cfg.individuals();
  out["seed"] = cfg.seed;
  out["gamma_means"] = cfg.means;
  out["gamma_shapes"] = cfg.shapes;
  out["tpm"] = to_json(truth.tpm);
  json paths = json::array();
  for (const auto& p : truth.state_paths) {
    json one = json::array();
    for (int s : p) one.push_back(s + 1);
    paths.push_back(std::move(one));
  }
  out["state_paths"] = std::move(paths);
  if (cfg.scenario == 2) out["contaminated_indices"] = truth.contaminated;
  if (cfg.scenario == 3) {
    out["tpm_component2"] = to_json(truth.tpm_component2);
    json comp = json::array();
    for (int c : truth.mixture_component) comp.push_back(c + 1);
    out["mixture_component"] = std::move(comp);
  }
  if (cfg.scenario == 4) out["state3_means"] = truth.state3_means;
  if (cfg.scenario == 5) out["state1_mean_paths"] = truth.state1_mean_paths;
  return out;
}

json report_to_json(const BenchmarkReport& report) {
  json out;
  out["T"] = report.config.T;
  out["replicates"] = report.config.replicates;
  out["true_order"] = report.config.true_order;
  out["seed"] = report.config.seed;
  json cells = json::array();
  for (const auto& c : report.cells) {
    json counts = json::object();
    for (const auto& [order, count] : c.order_counts)
      counts[std::to_string(order)] = count;
    cells.push_back({{"method", c.method},
                     {"scenario", c.scenario},
                     {"T", c.T},
                     {"order_counts", std::move(counts)},
                     {"failures", c.failures},
                     {"success_rate", c.success_rate},
                     {"wall_seconds_total", c.wall_seconds_total},
                     {"wall_seconds_mean", c.wall_seconds_mean}});
  }
  out["cells"] = std::move(cells);
  json outcomes = json::array();
  for (const auto& o : report.outcomes) {
    outcomes.push_back({{"scenario", o.scenario},
                        {"replicate", o.replicate},
                        {"method", o.method},
                        {"selected_order", o.selected_order},
                        {"failed", o.failed},
                        {"error", o.error},
                        {"wall_seconds", o.wall_seconds}});
  }
  out["outcomes"] = std::move(outcomes);
  return out;
}

namespace {

bool type_matches(const json& v, const std::string& t) {
  if (t == "object") return v.is_object();
  if (t == "array") return v.is_array();
  if (t == "string") return v.is_string();
  if (t == "number") return v.is_number();
  if (t == "integer") return v.is_number_integer() || v.is_number_unsigned();
  if (t == "boolean") return v.is_boolean();
  if (t == "null") return v.is_null();
  return false;
}

}  // namespace

void check_schema(const json& value, const json& schema, const std::string& path) {
  if (schema.contains("type")) {
    const std::string t = schema["type"].get<std::string>();
    if (!type_matches(value, t))
      throw parse_error(path + ": expected " + t + ", got " + std::string(value.type_name()));
  }
  if (schema.contains("enum")) {
    bool ok = false;
    for (const auto& e : schema["enum"]) ok = ok || e == value;
    if (!ok) throw parse_error(path + ": value not in enum");
  }
  if (schema.contains("minimum") && value.is_number()) {
    if (value.get<double>() < schema["minimum"].get<double>())
      throw parse_error(path + ": below minimum");
  }
  if (schema.contains("required")) {
    for (const auto& r : schema["required"]) {
      const std::string key = r.get<std::string>();
      if (!value.contains(key)) throw parse_error(path + ": missing required key '" + key + "'");
    }
  }
  if (schema.contains("properties") && value.is_object()) {
    for (const auto& [key, sub] : schema["properties"].items())
      if (value.contains(key)) check_schema(value.at(key), sub, path + "." + key);
  }
  if (schema.contains("items") && value.is_array()) {
    const json& sub = schema["items"];
    for (std::size_t i = 0; i < value.size(); ++i)
      check_schema(value[i], sub, path + "[" + std::to_string(i) + "]");
  }
}

}  // namespace dpmle
