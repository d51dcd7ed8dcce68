#ifndef DPMLE_JSON_IO_HPP
#define DPMLE_JSON_IO_HPP

#include <string>

#include <json.hpp>

#include "dpmle/benchmark.hpp"
#include "dpmle/hmm.hpp"
#include "dpmle/penalized_em.hpp"
#include "dpmle/scenarios.hpp"
#include "dpmle/selection.hpp"

namespace dpmle {

nlohmann::json to_json(const Matrix& m);
nlohmann::json to_json(const ChannelParams& p);
nlohmann::json to_json(const ParameterVector& p);
nlohmann::json to_json(const CriterionReport& r);
nlohmann::json to_json(const DPMLEFit& fit);
nlohmann::json truth_to_json(const ScenarioConfig& cfg, const ScenarioTruth& truth);
nlohmann::json report_to_json(const BenchmarkReport& report);

// Minimal structural JSON-schema check: type / required / properties / items
// / enum / minimum. Throws parse_error with a JSON-path on the first
// violation.
void check_schema(const nlohmann::json& value, const nlohmann::json& schema,
                  const std::string& path = "$");

}  // namespace dpmle

#endif
