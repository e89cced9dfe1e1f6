#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "probitmm/cli.hpp"
#include "probitmm/report.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

using namespace probitmm;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const char* env = std::getenv("PROBITMM_TEST_TMP");
    const fs::path root = env ? fs::path(env) : fs::temp_directory_path() / "probitmm_cli_tests";
    const fs::path dir = root / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json(const fs::path& path) { return json::parse(read_file(path)); }

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "probitmm");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

// Four groups of three rows with both responses present in every group.
const char* mixed_csv = "y,x,g\n"
                        "1,0.5,a\n0,-0.2,a\n1,1.0,a\n"
                        "0,0.3,b\n1,-1.1,b\n0,0.8,b\n"
                        "1,-0.4,c\n0,0.9,c\n0,0.1,c\n"
                        "0,1.2,d\n1,0.2,d\n1,-0.7,d\n";

json base_config(const std::string& data, const std::string& out) {
    return {{"data_path", data},
            {"response_column", "y"},
            {"fixed_columns", {"x"}},
            {"factor_columns", {"g"}},
            {"prior", {{{"a", 1.5}, {"b", 1.0}}}},
            {"sampler", {{"algorithm", "pxda"}, {"iterations", 1500}, {"burn_in", 300}, {"thin", 3}, {"seed", 2024}}},
            {"output_dir", out},
            {"link", "probit"},
            {"force", false}};
}

fs::path write_config(const fs::path& dir, const json& config, const std::string& name = "config.json") {
    const fs::path path = dir / name;
    write_file(path, config.dump(2));
    return path;
}

std::size_t count_lines(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

} // namespace

TEST_CASE("check: valid mixed dataset exits 0 and writes both reports") {
    const auto dir = scratch("check_ok");
    write_file(dir / "data.csv", mixed_csv);
    const auto cfg = write_config(dir, base_config("data.csv", "out"));
    const auto r = run({"check", "--config", cfg.string()});
    CHECK(r.code == cli::exit_ok);
    const auto p = read_json(dir / "out" / "propriety.json");
    const auto e = read_json(dir / "out" / "ergodicity.json");
    CHECK(p["overall"] == "proper");
    CHECK(e["overall"] == "geometric");
    CHECK(p["conditions"].is_array());
    CHECK(p["conditions"][0].contains("verdict"));
    CHECK(e["model"]["factors"][0]["level_order"] == json({"a", "b", "c", "d"}));
    CHECK(e["config"]["sampler"]["seed"] == 2024);
}

TEST_CASE("check: all-ones response exits 2 with an infeasible LP") {
    const auto dir = scratch("check_ones");
    write_file(dir / "data.csv", "y,g\n1,a\n1,a\n1,b\n1,b\n");
    auto config = base_config("data.csv", "out");
    config["fixed_columns"] = json::array();
    const auto r = run({"check", "--config", write_config(dir, config).string()});
    CHECK(r.code == cli::exit_not_established);
    const auto p = read_json(dir / "out" / "propriety.json");
    CHECK(p["lp"]["status"] == "infeasible");
    CHECK(p["overall"] == "not-established");
}

TEST_CASE("check: two-way dataset takes the theorem-4 path") {
    const auto dir = scratch("check_two_way");
    write_file(dir / "data.csv", "y,row,col\n1,r1,c1\n0,r1,c2\n0,r2,c1\n1,r2,c2\n1,r3,c1\n0,r3,c2\n");
    auto config = base_config("data.csv", "out");
    config["fixed_columns"] = json::array();
    config["factor_columns"] = {"row", "col"};
    config["prior"] = {{{"a", 1.5}, {"b", 1.0}}, {{"a", 1.5}, {"b", 1.0}}};
    const auto cfg = write_config(dir, config);
    const auto r = run({"check", "--config", cfg.string(), "--grid-size", "40"});
    CHECK(r.code == cli::exit_ok);
    const auto e = read_json(dir / "out" / "ergodicity.json");
    CHECK(e["path"] == 4);
    CHECK(e["grid"].size() == 40);
    CHECK(e["grid"][0].size() == 2);
    CHECK(e["model"]["q"] == 5);

    // Forcing theorem 2 reports the rank deficiency.
    const auto forced = run({"check", "--config", cfg.string(), "--theorem", "2", "--out", (dir / "t2").string()});
    CHECK(forced.code == cli::exit_not_established);
    const auto e2 = read_json(dir / "t2" / "ergodicity.json");
    CHECK(e2["path"] == 2);
    bool rank_failed = false;
    for (const auto& c : e2["conditions"])
        if (c["name"] == "A1") rank_failed = c["verdict"] == "fail";
    CHECK(rank_failed);
}

TEST_CASE("usage, I/O and validation errors exit 1") {
    const auto dir = scratch("errors");
    CHECK(run({}).code == cli::exit_error);
    CHECK(run({"fit"}).code == cli::exit_error);
    CHECK(run({"bogus"}).code == cli::exit_error);
    CHECK(run({"check", "--config", (dir / "missing.json").string()}).code == cli::exit_error);

    write_file(dir / "bad.json", "{ not json");
    CHECK(run({"check", "--config", (dir / "bad.json").string()}).code == cli::exit_error);

    write_file(dir / "data.csv", mixed_csv);
    auto no_seed = base_config("data.csv", "out");
    no_seed["sampler"].erase("seed");
    const auto r = run({"fit", "--config", write_config(dir, no_seed, "noseed.json").string()});
    CHECK(r.code == cli::exit_error);
    CHECK(r.err.find("seed") != std::string::npos);

    auto unknown = base_config("data.csv", "out");
    unknown["factor_columns"] = {"nope"};
    CHECK(run({"check", "--config", write_config(dir, unknown, "unknown.json").string()}).code == cli::exit_error);

    write_file(dir / "ragged.csv", "y,x,g\n1,0.5\n");
    CHECK(run({"check", "--config", write_config(dir, base_config("ragged.csv", "out"), "ragged.json").string()}).code ==
          cli::exit_error);

    auto prior_mismatch = base_config("data.csv", "out");
    prior_mismatch["prior"] = json::array();
    CHECK(run({"check", "--config", write_config(dir, prior_mismatch, "prior.json").string()}).code == cli::exit_error);

    auto help = run({"--help"});
    CHECK(help.code == cli::exit_ok);
    CHECK(help.out.find("simulate") != std::string::npos);
}

TEST_CASE("fit: files, retained rows and seed echo") {
    const auto dir = scratch("fit_ok");
    write_file(dir / "data.csv", mixed_csv);
    const auto cfg = write_config(dir, base_config("data.csv", "out"));
    const auto r = run({"fit", "--config", cfg.string()});
    CHECK(r.code == cli::exit_ok);
    CHECK(r.out.find("seed: 2024") != std::string::npos);
    const auto draws = read_file(dir / "out" / "draws.csv");
    CHECK(count_lines(draws) == 1 + (1500 - 300) / 3);
    CHECK(draws.substr(0, draws.find('\n')) == "beta_0,beta_1,u_1_1,u_1_2,u_1_3,u_1_4,tau_1");
    const auto summary = read_json(dir / "out" / "summary.json");
    CHECK(summary["seed"] == 2024);
    CHECK(summary["retained"] == 400);
    CHECK(summary["config"]["sampler"]["thin"] == 3);
    CHECK(summary["parameters"].size() == 7);
    CHECK(fs::exists(dir / "out" / "acf.csv"));

    SUBCASE("byte-identical on rerun") {
        CHECK(run({"fit", "--config", cfg.string(), "--out", (dir / "again").string()}).code == cli::exit_ok);
        CHECK(read_file(dir / "again" / "draws.csv") == draws);
    }
    SUBCASE("gibbs too") {
        auto config = base_config("data.csv", "g1");
        config["sampler"]["algorithm"] = "gibbs";
        const auto c1 = write_config(dir, config, "gibbs.json");
        CHECK(run({"fit", "--config", c1.string()}).code == cli::exit_ok);
        CHECK(run({"fit", "--config", c1.string(), "--out", (dir / "g2").string()}).code == cli::exit_ok);
        CHECK(read_file(dir / "g1" / "draws.csv") == read_file(dir / "g2" / "draws.csv"));
        CHECK(read_file(dir / "g1" / "draws.csv") != draws);
    }
}

TEST_CASE("fit: refused without force on an improper model") {
    const auto dir = scratch("fit_refused");
    write_file(dir / "data.csv", "y,g\n1,a\n1,a\n1,b\n1,b\n");
    auto config = base_config("data.csv", "out");
    config["fixed_columns"] = json::array();
    const auto cfg = write_config(dir, config);
    const auto r = run({"fit", "--config", cfg.string()});
    CHECK(r.code == cli::exit_not_established);
    CHECK_FALSE(fs::exists(dir / "out" / "draws.csv"));

    const auto forced = run({"fit", "--config", cfg.string(), "--force"});
    CHECK(forced.code == cli::exit_ok);
    CHECK(fs::exists(dir / "out" / "draws.csv"));
    CHECK(read_json(dir / "out" / "summary.json")["config"]["force"] == true);
}

TEST_CASE("compare: both sections, matched seeds, sane ESS") {
    const auto dir = scratch("compare");
    write_file(dir / "data.csv", mixed_csv);
    const auto r = run({"compare", "--config", write_config(dir, base_config("data.csv", "out")).string()});
    CHECK(r.code == cli::exit_ok);
    const auto doc = read_json(dir / "out" / "comparison.json");
    REQUIRE(doc.contains("gibbs"));
    REQUIRE(doc.contains("pxda"));
    CHECK(doc["gibbs"]["seed"] == doc["pxda"]["seed"]);
    CHECK(doc["gibbs"]["seed"] == 2024);
    const double retained = doc["gibbs"]["summary"]["retained"].get<double>();
    for (const auto& p : doc["parameters"]) {
        CHECK(p["ess_gibbs"].get<double>() > 0.0);
        CHECK(p["ess_pxda"].get<double>() > 0.0);
        CHECK(p["ess_gibbs"].get<double>() <= retained * 1.05);
        CHECK(p["ess_pxda"].get<double>() <= retained * 1.05);
    }
}

TEST_CASE("simulate") {
    const auto dir = scratch("simulate");
    json spec = {{"n", 200},
                 {"seed", 11},
                 {"fixed_columns", {"x1"}},
                 {"factors", {{{"name", "site"}, {"levels", 5}}}},
                 {"beta", {0.2, -0.5}},
                 {"tau", {2.0}},
                 {"output_dir", "sim"}};
    const auto cfg = write_config(dir, spec, "sim.json");
    CHECK(run({"simulate", "--config", cfg.string()}).code == cli::exit_ok);
    const auto table = read_csv_file((dir / "sim" / "data.csv").string());
    CHECK(table.rows.size() == 200);
    CHECK(table.header == std::vector<std::string>{"y", "x1", "site"});
    std::set<std::string> labels;
    for (const auto& row : table.rows) labels.insert(row[2]);
    CHECK(labels.size() == 5);

    CHECK(run({"simulate", "--config", cfg.string(), "--out", (dir / "again").string()}).code == cli::exit_ok);
    CHECK(read_file(dir / "sim" / "data.csv") == read_file(dir / "again" / "data.csv"));
    CHECK(read_file(dir / "sim" / "truth.csv") == read_file(dir / "again" / "truth.csv"));

    SUBCASE("extreme tau shrinks u to zero") {
        spec["tau"] = {1e6};
        spec["output_dir"] = "shrunk";
        CHECK(run({"simulate", "--config", write_config(dir, spec, "shrunk.json").string()}).code == cli::exit_ok);
        const auto truth = read_csv_file((dir / "shrunk" / "truth.csv").string());
        for (const auto& row : truth.rows)
            if (row[0].rfind("u_", 0) == 0) CHECK(std::abs(std::stod(row[1])) < 0.01);
    }
    SUBCASE("invalid spec") {
        spec["beta"] = {0.2};
        CHECK(run({"simulate", "--config", write_config(dir, spec, "bad.json").string()}).code == cli::exit_error);
    }
}

TEST_CASE("round trip: simulate then fit recovers beta") {
    const auto dir = scratch("round_trip");
    const json spec = {{"n", 600},
                       {"seed", 5},
                       {"fixed_columns", {"x1"}},
                       {"factors", {{{"name", "g"}, {"levels", 6}}}},
                       {"beta", {0.3, -0.8}},
                       {"tau", {2.0}},
                       {"output_dir", "sim"}};
    REQUIRE(run({"simulate", "--config", write_config(dir, spec, "sim.json").string()}).code == cli::exit_ok);
    auto config = base_config("sim/data.csv", "fit");
    config["fixed_columns"] = {"x1"};
    config["sampler"]["iterations"] = 6000;
    config["sampler"]["burn_in"] = 1000;
    config["sampler"]["thin"] = 1;
    REQUIRE(run({"fit", "--config", write_config(dir, config).string()}).code == cli::exit_ok);
    const auto summary = read_json(dir / "fit" / "summary.json");
    const double truth[] = {0.3, -0.8};
    for (int k = 0; k < 2; ++k) {
        const auto& p = summary["parameters"][static_cast<std::size_t>(k)];
        const double band = 3.0 * p["mcse"].get<double>() + 3.0 * p["sd"].get<double>();
        CHECK_MESSAGE(std::abs(p["mean"].get<double>() - truth[k]) < band, p["label"].get<std::string>());
    }
}
