#include "probitmm/cli.hpp"

#include "probitmm/diagnostics.hpp"
#include "probitmm/report.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <fstream>
#include <ostream>

namespace probitmm::cli {

using nlohmann::json;
using Eigen::Index;
namespace fs = std::filesystem;

namespace {

template <typename T>
T required(const json& doc, const char* key) {
    if (!doc.contains(key)) throw ValidationError(std::string("config: missing required field '") + key + "'");
    try {
        return doc.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: field '") + key + "': " + e.what());
    }
}

template <typename T>
T optional_field(const json& doc, const char* key, T fallback) {
    if (!doc.contains(key)) return fallback;
    try {
        return doc.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: field '") + key + "': " + e.what());
    }
}

fs::path resolve(const fs::path& base, const std::string& p, const char* key) {
    if (p.empty()) throw ValidationError(std::string("config: '") + key + "' must be nonempty");
    const fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

Eigen::VectorXd to_vector(const std::vector<double>& values) {
    return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Index>(values.size()));
}

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

ErgodicityPath parse_path(const std::string& name) {
    if (name == "auto") return ErgodicityPath::automatic;
    if (name == "2") return ErgodicityPath::theorem2;
    if (name == "4") return ErgodicityPath::theorem4;
    throw ValidationError("ergodicity path must be auto, 2 or 4 (got '" + name + "')");
}

std::string path_name(ErgodicityPath path) {
    switch (path) {
    case ErgodicityPath::theorem2: return "2";
    case ErgodicityPath::theorem4: return "4";
    default: return "auto";
    }
}

std::string format_number(double x) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

json parse_document(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
}

void write_json(const fs::path& path, const json& doc) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << doc.dump(2) << '\n';
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    return out;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory '" + dir.string() + "': " + ec.message());
}

} // namespace

RunConfig parse_run_config(const json& doc, const fs::path& base_dir) {
    if (!doc.is_object()) throw ValidationError("config: top level must be a JSON object");
    RunConfig c;
    c.data_path = resolve(base_dir, required<std::string>(doc, "data_path"), "data_path");
    c.response_column = required<std::string>(doc, "response_column");
    if (c.response_column.empty()) throw ValidationError("config: 'response_column' must be nonempty");
    c.fixed_columns = optional_field<std::vector<std::string>>(doc, "fixed_columns", {});
    c.factor_columns = required<std::vector<std::string>>(doc, "factor_columns");
    c.output_dir = resolve(base_dir, required<std::string>(doc, "output_dir"), "output_dir");

    const json prior = required<json>(doc, "prior");
    if (!prior.is_array() || prior.size() != c.factor_columns.size())
        throw ValidationError("config: 'prior' must list one {a, b} entry per factor column");
    c.prior.a.resize(static_cast<Index>(prior.size()));
    c.prior.b.resize(static_cast<Index>(prior.size()));
    for (std::size_t j = 0; j < prior.size(); ++j) {
        c.prior.a[static_cast<Index>(j)] = required<double>(prior[j], "a");
        c.prior.b[static_cast<Index>(j)] = required<double>(prior[j], "b");
    }

    const std::string link = optional_field<std::string>(doc, "link", "probit");
    if (link == "probit") c.link.link = Link::probit;
    else if (link == "logistic") c.link.link = Link::logistic;
    else throw ValidationError("config: 'link' must be probit or logistic (got '" + link + "')");
    c.force = optional_field<bool>(doc, "force", false);

    const json sampler = required<json>(doc, "sampler");
    if (!sampler.is_object()) throw ValidationError("config: 'sampler' must be an object");
    if (!sampler.contains("seed")) throw ValidationError("config: 'sampler.seed' is mandatory");
    auto& s = c.sampler;
    s.seed = required<std::uint64_t>(sampler, "seed");
    s.stream = optional_field<std::uint64_t>(sampler, "stream", 0);
    s.algorithm = parse_algorithm(optional_field<std::string>(sampler, "algorithm", "pxda"));
    s.iterations = optional_field<Index>(sampler, "iterations", 10000);
    s.burn_in = optional_field<Index>(sampler, "burn_in", 1000);
    s.thin = optional_field<Index>(sampler, "thin", 1);
    s.grid_size = optional_field<Index>(sampler, "grid_size", default_grid_size);
    s.ergodicity_path = parse_path(optional_field<std::string>(sampler, "ergodicity_path", "auto"));
    if (sampler.contains("init_eta") && !(sampler["init_eta"].is_string() && sampler["init_eta"] == "zero"))
        s.init_eta = to_vector(required<std::vector<double>>(sampler, "init_eta"));
    s.force = c.force;
    validate(s);
    return c;
}

RunConfig load_run_config(const fs::path& path) { return parse_run_config(parse_document(path), path.parent_path()); }

json to_json(const RunConfig& c) {
    json prior = json::array();
    for (Index j = 0; j < c.prior.a.size(); ++j) prior.push_back({{"a", c.prior.a[j]}, {"b", c.prior.b[j]}});
    json sampler = probitmm::to_json(c.sampler);
    sampler.erase("force");
    sampler["ergodicity_path"] = path_name(c.sampler.ergodicity_path);
    return {{"data_path", c.data_path.string()},
            {"response_column", c.response_column},
            {"fixed_columns", c.fixed_columns},
            {"factor_columns", c.factor_columns},
            {"prior", prior},
            {"sampler", sampler},
            {"output_dir", c.output_dir.string()},
            {"link", probitmm::to_string(c.link.link)},
            {"force", c.force}};
}

SimulateConfig parse_simulate_config(const json& doc, const fs::path& base_dir) {
    if (!doc.is_object()) throw ValidationError("config: top level must be a JSON object");
    SimulateConfig c;
    c.n = required<Index>(doc, "n");
    if (c.n < 1) throw ValidationError("config: 'n' must be positive");
    c.seed = required<std::uint64_t>(doc, "seed");
    c.fixed_columns = optional_field<std::vector<std::string>>(doc, "fixed_columns", {});
    c.response_column = optional_field<std::string>(doc, "response_column", "y");
    c.output_dir = resolve(base_dir, required<std::string>(doc, "output_dir"), "output_dir");
    for (const auto& f : required<json>(doc, "factors")) {
        FactorSpec spec{required<std::string>(f, "name"), required<int>(f, "levels")};
        if (spec.levels < 1) throw ValidationError("config: factor '" + spec.name + "' needs at least one level");
        c.factors.push_back(spec);
    }
    c.beta = to_vector(required<std::vector<double>>(doc, "beta"));
    c.tau = to_vector(required<std::vector<double>>(doc, "tau"));
    if (c.beta.size() != static_cast<Index>(c.fixed_columns.size()) + 1)
        throw ValidationError("config: 'beta' needs the intercept plus one entry per fixed column");
    if (c.tau.size() != static_cast<Index>(c.factors.size()))
        throw ValidationError("config: 'tau' needs one entry per factor");
    return c;
}

ProbitMixedModel load_model(const RunConfig& config) {
    const Table table = read_csv_file(config.data_path.string());
    return build_design(table, {config.response_column, config.fixed_columns, config.factor_columns}, config.prior);
}

int cmd_check(const RunConfig& config, std::ostream& out) {
    const ProbitMixedModel model = load_model(config);
    const ProprietyReport propriety = check_propriety(model, config.link);
    const ErgodicityReport ergodicity =
        check_geometric_ergodicity(model, config.sampler.ergodicity_path, config.sampler.grid_size);

    ensure_dir(config.output_dir);
    json p = to_json(propriety);
    p["model"] = model_metadata(model);
    p["config"] = to_json(config);
    write_json(config.output_dir / "propriety.json", p);
    json e = to_json(ergodicity);
    e["model"] = model_metadata(model);
    e["config"] = to_json(config);
    write_json(config.output_dir / "ergodicity.json", e);

    out << "propriety (path " << (propriety.path == ProprietyPath::A ? "A" : "B") << "): " << to_string(propriety.overall)
        << '\n';
    for (const auto& c : propriety.conditions) out << "  " << c.name << ": " << to_string(c.verdict) << '\n';
    out << "ergodicity (theorem " << ergodicity.theorem_path << "): " << to_string(ergodicity.overall) << '\n';
    for (const auto& c : ergodicity.conditions) out << "  " << c.name << ": " << to_string(c.verdict) << '\n';

    const bool ok = propriety.overall == ProprietyOverall::proper && ergodicity.overall == ErgodicityOverall::geometric;
    return ok ? exit_ok : exit_not_established;
}

int cmd_fit(const RunConfig& config, std::ostream& out) {
    if (config.link.link != Link::probit) throw ValidationError("fit: the sampler supports the probit link only");
    const ProbitMixedModel model = load_model(config);
    out << "seed: " << config.sampler.seed << '\n';
    ChainOutput chain;
    try {
        chain = run_chain(model, config.sampler);
    } catch (const RefusedRun& e) {
        out << "refused: " << e.what() << '\n';
        return exit_not_established;
    }

    ensure_dir(config.output_dir);
    {
        auto draws = open_output(config.output_dir / "draws.csv");
        write_draws_csv(draws, chain);
    }

    json summary = to_json(summarize(chain));
    summary["config"] = to_json(config);
    summary["model"] = model_metadata(model);
    summary["elapsed_seconds"] = chain.elapsed_seconds;
    summary["rescale_skips"] = chain.rescale_skips;
    write_json(config.output_dir / "summary.json", summary);

    // Autocorrelation series for external plotting: lag column then one column per parameter.
    constexpr Index max_lag = 50;
    std::vector<Eigen::VectorXd> acf;
    for (Index k = 0; k < chain.draws.cols(); ++k) acf.push_back(autocorrelation(chain.draws.col(k), max_lag));
    auto acf_out = open_output(config.output_dir / "acf.csv");
    acf_out << "lag";
    for (const auto& label : chain.column_labels) acf_out << ',' << label;
    acf_out << '\n';
    for (Index lag = 0; lag < acf.front().size(); ++lag) {
        acf_out << lag;
        for (const auto& a : acf) acf_out << ',' << format_number(a[lag]);
        acf_out << '\n';
    }

    out << "retained draws: " << chain.retained() << '\n';
    out << "wrote " << (config.output_dir / "draws.csv").string() << '\n';
    return exit_ok;
}

int cmd_compare(const RunConfig& config, std::ostream& out) {
    if (config.link.link != Link::probit) throw ValidationError("compare: the sampler supports the probit link only");
    const ProbitMixedModel model = load_model(config);
    ComparisonReport report;
    try {
        report = compare_algorithms(model, config.sampler);
    } catch (const RefusedRun& e) {
        out << "refused: " << e.what() << '\n';
        return exit_not_established;
    }
    ensure_dir(config.output_dir);
    json doc = to_json(report);
    doc["config"] = to_json(config);
    doc["model"] = model_metadata(model);
    write_json(config.output_dir / "comparison.json", doc);
    out << "seed: " << report.seed_gibbs << '\n';
    for (const auto& c : report.parameters)
        out << "  " << c.label << ": lag1 gibbs " << c.lag1_gibbs << ", pxda " << c.lag1_pxda << '\n';
    out << "pxda no worse than gibbs on every parameter: " << (report.expectation_met ? "yes" : "no") << '\n';
    return exit_ok;
}

int cmd_simulate(const SimulateConfig& config, std::ostream& out) {
    const Index n = config.n;
    const Index p = static_cast<Index>(config.fixed_columns.size()) + 1;

    RandomStream covariates(config.seed, 1);
    Eigen::MatrixXd X(n, p);
    X.col(0).setOnes();
    for (Index k = 1; k < p; ++k)
        for (Index i = 0; i < n; ++i) X(i, k) = covariates.normal();

    std::vector<std::vector<int>> levels(config.factors.size(), std::vector<int>(static_cast<std::size_t>(n)));
    std::vector<int> counts;
    for (const auto& f : config.factors) counts.push_back(f.levels);
    for (Index i = 0; i < n; ++i) {
        Index rest = i;
        for (std::size_t j = 0; j < counts.size(); ++j) {
            levels[j][static_cast<std::size_t>(i)] = static_cast<int>(rest % counts[j]);
            rest /= counts[j];
        }
    }
    RandomEffectsStructure re = RandomEffectsStructure::from_levels(levels, counts);
    const SimulatedData sim = simulate_data(X, re, config.beta, config.tau, config.seed);

    ensure_dir(config.output_dir);
    {
        auto data = open_output(config.output_dir / "data.csv");
        data << config.response_column;
        for (const auto& name : config.fixed_columns) data << ',' << name;
        for (const auto& f : config.factors) data << ',' << f.name;
        data << '\n';
        for (Index i = 0; i < n; ++i) {
            data << sim.obs.y[i];
            for (Index k = 1; k < p; ++k) data << ',' << format_number(X(i, k));
            for (std::size_t j = 0; j < config.factors.size(); ++j)
                data << ',' << config.factors[j].name << '_' << (levels[j][static_cast<std::size_t>(i)] + 1);
            data << '\n';
        }
    }
    {
        auto truth = open_output(config.output_dir / "truth.csv");
        truth << "parameter,value\n";
        for (Index k = 0; k < p; ++k) truth << "beta_" << k << ',' << format_number(config.beta[k]) << '\n';
        for (Index j = 0; j < config.tau.size(); ++j) truth << "tau_" << j + 1 << ',' << format_number(config.tau[j]) << '\n';
        for (Index j = 0; j < re.r(); ++j)
            for (Index k = 0; k < re.q[j]; ++k)
                truth << "u_" << j + 1 << '_' << k + 1 << ',' << format_number(sim.u[re.block_offsets[j] + k]) << '\n';
    }
    out << "seed: " << config.seed << '\n';
    out << "wrote " << n << " rows to " << (config.output_dir / "data.csv").string() << '\n';
    return exit_ok;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Bayesian probit mixed models: condition checks, Gibbs and PX-DA sampling"};
    app.require_subcommand(1);

    std::string config_path;
    bool force = false;
    Index grid_size = 0;
    std::string out_dir;
    std::string theorem;

    auto add_common = [&](CLI::App* sub, bool sampling) {
        sub->add_option("--config", config_path, "JSON configuration file")->required();
        sub->add_option("--out", out_dir, "Output directory (overrides output_dir)");
        if (!sampling) return;
        sub->add_flag("--force", force, "Run even when conditions are not established");
        sub->add_option("--grid-size", grid_size, "Grid points for the ergodicity criterion")->check(CLI::PositiveNumber);
        sub->add_option("--theorem", theorem, "Ergodicity theorem path")->check(CLI::IsMember({"auto", "2", "4"}));
    };
    auto* check = app.add_subcommand("check", "Check propriety and geometric ergodicity conditions");
    auto* fit = app.add_subcommand("fit", "Run a chain and write draws and a summary");
    auto* compare = app.add_subcommand("compare", "Run Gibbs and PX-DA on the same seed and compare mixing");
    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset and its true parameters");
    add_common(check, true);
    add_common(fit, true);
    add_common(compare, true);
    add_common(simulate, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return exit_error;
    }

    try {
        if (simulate->parsed()) {
            const fs::path path(config_path);
            auto config = parse_simulate_config(parse_document(path), path.parent_path());
            if (!out_dir.empty()) config.output_dir = out_dir;
            return cmd_simulate(config, out);
        }
        RunConfig config = load_run_config(config_path);
        if (!out_dir.empty()) config.output_dir = out_dir;
        if (force) config.force = config.sampler.force = true;
        if (grid_size > 0) config.sampler.grid_size = grid_size;
        if (!theorem.empty()) config.sampler.ergodicity_path = parse_path(theorem);
        if (check->parsed()) return cmd_check(config, out);
        if (fit->parsed()) return cmd_fit(config, out);
        return cmd_compare(config, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_error;
    }
}

} // namespace probitmm::cli
