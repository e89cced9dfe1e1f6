#pragma once

#include "probitmm/conditions.hpp"
#include "probitmm/diagnostics.hpp"
#include "probitmm/model.hpp"
#include "probitmm/sampler.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>

namespace probitmm {

// Structured reports. Field names are stable: {path, conditions: [{name, verdict, detail}],
// overall, grid: [[s, lhs], ...]} plus report-specific extras.

nlohmann::json to_json(const ConditionResult& c);
nlohmann::json to_json(const LPResult& lp);
nlohmann::json to_json(const ProprietyReport& report);
nlohmann::json to_json(const ErgodicityReport& report);
nlohmann::json to_json(const SamplerConfig& config);
nlohmann::json to_json(const SummaryReport& report);
nlohmann::json to_json(const ComparisonReport& report);
nlohmann::json to_json(const OracleResult& result);

/// Factor names, level orderings and parameter labels; makes u_j_k labels reproducible.
nlohmann::json model_metadata(const ProbitMixedModel& model);

/// Parses comma-separated text with a header row. Double-quoted cells may contain commas.
Table read_csv(std::istream& is);
Table read_csv_file(const std::string& path);

} // namespace probitmm
