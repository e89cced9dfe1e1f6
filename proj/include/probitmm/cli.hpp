#pragma once

#include "probitmm/conditions.hpp"
#include "probitmm/model.hpp"
#include "probitmm/sampler.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace probitmm::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_error = 1;           // usage, I/O or validation
inline constexpr int exit_not_established = 2; // conditions not established, or run refused

struct RunConfig {
    std::filesystem::path data_path;
    std::string response_column;
    std::vector<std::string> fixed_columns;
    std::vector<std::string> factor_columns;
    PriorSpec prior;
    SamplerConfig sampler;
    std::filesystem::path output_dir;
    LinkSpec link;
    bool force = false;
};

/// Relative paths are resolved against base_dir. The sampler seed is required.
RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// Fully resolved echo of the configuration, defaults included.
nlohmann::json to_json(const RunConfig& config);

struct FactorSpec {
    std::string name;
    int levels = 0;
};

/// Synthetic-data request. Covariates are iid N(0, 1); factor levels are assigned by crossing
/// (mixed-radix counter over the rows). beta includes the intercept.
struct SimulateConfig {
    Eigen::Index n = 0;
    std::vector<std::string> fixed_columns;
    std::vector<FactorSpec> factors;
    Eigen::VectorXd beta;
    Eigen::VectorXd tau;
    std::uint64_t seed = 0;
    std::string response_column = "y";
    std::filesystem::path output_dir;
};

SimulateConfig parse_simulate_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});

ProbitMixedModel load_model(const RunConfig& config);

int cmd_check(const RunConfig& config, std::ostream& out);
int cmd_fit(const RunConfig& config, std::ostream& out);
int cmd_compare(const RunConfig& config, std::ostream& out);
int cmd_simulate(const SimulateConfig& config, std::ostream& out);

/// Full command-line entry point: parses flags, dispatches, maps exceptions to exit codes.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace probitmm::cli
