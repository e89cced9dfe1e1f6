#include "probitmm/report.hpp"

#include <fstream>
#include <istream>

namespace probitmm {

using nlohmann::json;
using Eigen::Index;

namespace {

json vector_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Index k = 0; k < v.size(); ++k) out.push_back(v[k]);
    return out;
}

json conditions_json(const std::vector<ConditionResult>& conditions) {
    json out = json::array();
    for (const auto& c : conditions) out.push_back(to_json(c));
    return out;
}

std::string to_string(ErgodicityPath path) {
    switch (path) {
    case ErgodicityPath::automatic: return "auto";
    case ErgodicityPath::theorem2: return "2";
    case ErgodicityPath::theorem4: return "4";
    }
    return "auto";
}

} // namespace

json to_json(const ConditionResult& c) { return {{"name", c.name}, {"verdict", to_string(c.verdict)}, {"detail", c.detail}}; }

json to_json(const LPResult& lp) {
    json out = {{"status", to_string(lp.status)}, {"iterations", lp.iterations}};
    if (lp.witness_e) {
        out["witness_e"] = vector_json(*lp.witness_e);
        out["residual"] = lp.residual;
    }
    return out;
}

json to_json(const ProprietyReport& report) {
    json out = {{"path", report.path == ProprietyPath::A ? "A" : "B"},
                {"conditions", conditions_json(report.conditions)},
                {"overall", to_string(report.overall)},
                {"grid", json::array()}};
    if (report.lp) out["lp"] = to_json(*report.lp);
    return out;
}

json to_json(const ErgodicityReport& report) {
    json out = {{"path", report.theorem_path},
                {"conditions", conditions_json(report.conditions)},
                {"overall", to_string(report.overall)},
                {"grid", json::array()}};
    if (report.criterion) {
        const auto& c = *report.criterion;
        for (const auto& [s, lhs] : c.grid) out["grid"].push_back({s, lhs});
        out["s_tilde"] = c.s_tilde;
        out["s_star"] = c.s_star ? json(*c.s_star) : json(nullptr);
        out["min_lhs"] = c.grid.empty() ? json(nullptr) : json(c.min_lhs);
        out["trace_terms"] = vector_json(c.trace_terms);
    }
    return out;
}

json to_json(const SamplerConfig& config) {
    json out = {{"algorithm", to_string(config.algorithm)},
                {"iterations", config.iterations},
                {"burn_in", config.burn_in},
                {"thin", config.thin},
                {"seed", config.seed},
                {"stream", config.stream},
                {"force", config.force},
                {"ergodicity_path", to_string(config.ergodicity_path)},
                {"grid_size", config.grid_size}};
    out["init_eta"] = config.init_eta ? vector_json(*config.init_eta) : json("zero");
    return out;
}

json to_json(const SummaryReport& report) {
    json params = json::array();
    for (const auto& p : report.parameters) {
        params.push_back({{"label", p.label},
                          {"mean", p.mean},
                          {"sd", p.sd},
                          {"mcse", p.mcse},
                          {"ess", p.ess},
                          {"lag1_autocorrelation", p.lag1},
                          {"constant", p.constant}});
    }
    return {{"retained", report.retained}, {"algorithm", report.algorithm}, {"seed", report.seed}, {"parameters", params}};
}

json to_json(const ComparisonReport& report) {
    json params = json::array();
    for (const auto& c : report.parameters) {
        params.push_back({{"label", c.label},
                          {"ess_gibbs", c.ess_gibbs},
                          {"ess_pxda", c.ess_pxda},
                          {"lag1_gibbs", c.lag1_gibbs},
                          {"lag1_pxda", c.lag1_pxda},
                          {"ess_per_second_gibbs", c.ess_per_second_gibbs},
                          {"ess_per_second_pxda", c.ess_per_second_pxda},
                          {"pxda_no_worse", c.pxda_no_worse}});
    }
    return {{"iterations", report.iterations},
            {"gibbs", {{"seed", report.seed_gibbs}, {"seconds", report.seconds_gibbs}, {"summary", to_json(report.gibbs)}}},
            {"pxda", {{"seed", report.seed_pxda}, {"seconds", report.seconds_pxda}, {"summary", to_json(report.pxda)}}},
            {"parameters", params},
            {"slack", comparison_slack},
            {"expectation", "pxda lag-1 autocorrelation <= gibbs lag-1 autocorrelation + slack"},
            {"expectation_met", report.expectation_met}};
}

json to_json(const OracleResult& result) {
    return {{"beta_mean", vector_json(result.beta_mean)},
            {"u_mean", vector_json(result.u_mean)},
            {"tau_mean", vector_json(result.tau_mean)},
            {"sd", vector_json(result.sd)},
            {"nodes", result.nodes},
            {"dimension", result.dimension},
            {"estimated_error", result.estimated_error},
            {"converged", result.converged}};
}

json model_metadata(const ProbitMixedModel& model) {
    json factors = json::array();
    const auto& re = model.re();
    for (Index j = 0; j < re.r(); ++j) {
        json f = {{"index", j + 1}, {"levels", re.q[j]}};
        if (static_cast<std::size_t>(j) < re.factor_names.size()) f["name"] = re.factor_names[static_cast<std::size_t>(j)];
        if (static_cast<std::size_t>(j) < re.level_names.size()) f["level_order"] = re.level_names[static_cast<std::size_t>(j)];
        factors.push_back(f);
    }
    return {{"n", model.n()},
            {"p", model.p()},
            {"q", model.q()},
            {"r", model.r()},
            {"fixed_columns", model.obs().x_names},
            {"factors", factors},
            {"parameters", draw_labels(model)},
            {"prior_a", vector_json(model.prior().a)},
            {"prior_b", vector_json(model.prior().b)}};
}

Table read_csv(std::istream& is) {
    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::string cell;
        bool quoted = false;
        for (std::size_t k = 0; k < line.size(); ++k) {
            const char ch = line[k];
            if (quoted) {
                if (ch == '"' && k + 1 < line.size() && line[k + 1] == '"') {
                    cell += '"';
                    ++k;
                } else if (ch == '"') {
                    quoted = false;
                } else {
                    cell += ch;
                }
            } else if (ch == '"') {
                quoted = true;
            } else if (ch == ',') {
                cells.push_back(std::move(cell));
                cell.clear();
            } else {
                cell += ch;
            }
        }
        if (quoted) throw ValidationError("csv: unterminated quoted field");
        cells.push_back(std::move(cell));
        return cells;
    };

    Table table;
    std::string line;
    bool have_header = false;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split(line);
        if (!have_header) {
            table.header = std::move(cells);
            have_header = true;
            continue;
        }
        if (cells.size() != table.header.size())
            throw ValidationError("csv: row " + std::to_string(table.rows.size() + 2) + " has " + std::to_string(cells.size()) +
                                  " fields, header has " + std::to_string(table.header.size()));
        table.rows.push_back(std::move(cells));
    }
    if (!have_header) throw ValidationError("csv: missing header row");
    return table;
}

Table read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    return read_csv(in);
}

} // namespace probitmm
