#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "softguide/cli_runner.hpp"
#include "softguide/errors.hpp"

using namespace softguide;
namespace fs = std::filesystem;

namespace {

const std::string minimal = R"({
  "profile": {"family": "zero"},
  "well": {"profile": "flat_bottom", "a": 1.0, "V0": 1.0},
  "run": "transverse"
})";

std::string error_of(const std::string& text) {
    try {
        (void)parse_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

bool contains(const std::string& haystack, const std::string& needle) {
    return haystack.find(needle) != std::string::npos;
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("softguide_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SOFTGUIDE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Zero-profile full run, shared by the straight-case checks below.
const RunReport& straight_report() {
    static const RunReport report = [] {
        auto c = parse_config(minimal);
        const auto all = all_analyses();
        return run(c, all);
    }();
    return report;
}

}  // namespace

TEST_CASE("minimal config loads with every default filled in") {
    const auto c = parse_config(minimal);
    CHECK(c.profile.family == CurveFamily::zero);
    CHECK(c.well.j_lo == -1.0);
    CHECK(c.well.j_hi == 1.0);
    CHECK(c.well.eps == 1.0);
    CHECK(c.numerics.s_order == 8);
    CHECK(c.numerics.eps_ladder == default_eps_ladder());
    CHECK(c.run == std::vector<Analysis>{Analysis::transverse});
    const auto j = to_json(c);
    CHECK(j["numerics"].contains("fd_node_cap"));
    CHECK(j["numerics"]["straight_check_nodes"] == 400);
    CHECK(j["output"]["format"] == "json");
}

TEST_CASE("validation errors cite the violated assumption and name the key") {
    const auto d = error_of(R"({"profile": {"family": "smooth_bump", "amplitude": 2.0, "s0": 0.5},
                               "well": {"a": 0.6, "V0": 1.0}})");
    CHECK(contains(d, "assumption (d)"));
    CHECK(contains(d, "well.a"));

    const auto e = error_of(R"({"well": {"a": 1.0, "V0": -1.0}})");
    CHECK(contains(e, "assumption (e)"));
    CHECK(contains(e, "well.V0"));

    const auto sampled = error_of(R"({"well": {"profile": "sampled", "a": 1.0, "u": [-1, 0, 1], "v": [0, -2, 0]}})");
    CHECK(contains(sampled, "assumption (e)"));

    CHECK(contains(error_of(R"({"well": {"a": 1.0, "V0": 1.0, "depth": 3}})"), "well.depth: unknown key"));
    CHECK(contains(error_of(R"({"well": {"a": 1.0, "V0": 1.0}, "extra": 1})"), "extra: unknown key"));
    CHECK(contains(error_of(R"({"well": {"a": 1.0, "V0": 1.0}, "numerics": {"s_ordr": 6}})"),
                   "numerics.s_ordr: unknown key"));
    CHECK(contains(error_of(R"({"well": {"a": "wide", "V0": 1.0}})"), "well.a: expected a number"));
    CHECK(contains(error_of(R"({"well": {"a": 1.0, "V0": 1.0}, "run": "everything"})"), "run"));
    CHECK(contains(error_of(R"({"well": {"a": 1.0, "V0": 1.0}, "run": "sweep"})"), "sweep"));
    CHECK(contains(error_of(R"({"well": {"a": 1.0, "V0": 1.0}, "run": "sweep",
                                "sweep": {"parameter": "c", "values": [1]}})"),
                   "sweep.parameter"));
    CHECK(contains(error_of(R"({"profile": {"family": "smooth_bump", "amplitude": 0.5, "s0": 1.0},
                                "well": {"a": 1.0, "V0": 1.0}, "run": "sweep",
                                "sweep": {"parameter": "c", "values": [0.5, 1.5]}})"),
                   "assumption (d)"));
}

TEST_CASE("malformed JSON reports line and column") {
    const auto msg = error_of("{\n  \"well\": {\"a\": 1.0,\n    \"V0\": }\n}");
    CHECK(contains(msg, "line 3"));
    CHECK(contains(msg, "column"));
    CHECK_THROWS_AS(load_config("/nonexistent/softguide.json"), IoError);
}

TEST_CASE("execution plan adds prerequisites in dependency order") {
    const Analysis req[] = {Analysis::oracle, Analysis::limits};
    const auto plan = execution_plan(req);
    CHECK(plan == std::vector<Analysis>{Analysis::validate, Analysis::transverse, Analysis::oracle, Analysis::limits});
    const Analysis only_limits[] = {Analysis::limits};
    CHECK(execution_plan(only_limits) == std::vector<Analysis>{Analysis::validate, Analysis::limits});
}

TEST_CASE("zero profile: no excess, no bound state, oracle finds nothing below") {
    const auto& r = straight_report();
    CHECK(r.exit_code() == 0);
    REQUIRE(r.condition);
    REQUIRE(r.excess);
    CHECK(std::abs(r.condition->value) < 1e-8 * r.ground->kappa0);
    CHECK(std::abs(r.excess->value) < 1e-8);
    REQUIRE(r.bound_states);
    CHECK(r.bound_states->search.states.empty());
    REQUIRE(r.oracle);
    CHECK(r.oracle->verdict == Verdict::none_below);
    for (const auto& rec : r.records) CHECK(rec.status == Status::ok);

    // Every numeric field carries a method tag.
    const auto j = deterministic_part(r);
    for (const auto* key : {"epsilon0", "kappa0", "alpha"}) {
        CHECK(j["transverse"][key].contains("method"));
        CHECK(j["transverse"][key].contains("error"));
    }
    CHECK(j["exists"]["condition_integral"]["method"] == "nystrom");
    CHECK(j["oracle"]["levels"][0]["energy"]["method"] == "fd");
    CHECK(j["resolution"]["fd"]["h"].get<double>() > 0.0);
    CHECK_FALSE(j.contains("runtime"));
    CHECK(to_json(r).contains("runtime"));
}

TEST_CASE("emit: JSON round-trip is bit-exact, CSV headers fixed, lambda curve decreasing") {
    const auto& r = straight_report();
    const auto dir = scratch("emit");
    const auto files = emit(r, dir, OutputFormat::both);
    CHECK(files.size() >= 8);

    const auto parsed = Json::parse(slurp(dir / "report.json"));
    CHECK(parsed == to_json(r));
    CHECK(parsed["schema"] == report_schema);
    CHECK(parsed["schema_version"] == report_schema_version);
    CHECK(parsed["transverse"]["epsilon0"]["value"].get<double>() == r.ground->epsilon0);
    CHECK(parsed["exists"]["normalization"].get<double>() == r.condition->normalization);

    CHECK(slurp(dir / "transverse.csv").starts_with("epsilon0,kappa0,error_estimate,method\n"));
    CHECK(slurp(dir / "lambda_curve.csv").starts_with("kappa,lambda\n"));
    CHECK(slurp(dir / "oracle.csv").starts_with("index,energy_fine,energy_coarse,extrapolated,error,verdict\n"));
    CHECK(slurp(dir / "delta_limit.csv").starts_with("eps,epsilon0,gap,above_threshold\n"));
    CHECK(slurp(dir / "hard_wall.csv").starts_with("V0,epsilon0,shifted,dirichlet\n"));

    std::istringstream lam(slurp(dir / "lambda_curve.csv"));
    std::string line;
    std::getline(lam, line);
    double prev = 1e300;
    int rows = 0;
    while (std::getline(lam, line)) {
        const double value = std::stod(line.substr(line.find(',') + 1));
        CHECK(value < prev);
        prev = value;
        ++rows;
    }
    CHECK(rows == r.config.numerics.lambda_points);

    CHECK_THROWS_AS(emit(r, "/proc/softguide-no-such-dir", OutputFormat::json), IoError);
}

TEST_CASE("sweep over the bend amplitude: one row per value, header named after the axis") {
    auto c = parse_config(R"({
      "profile": {"family": "gaussian", "amplitude": 0.5, "sigma": 1.0},
      "well": {"a": 1.0, "V0": 1.0},
      "run": "sweep",
      "sweep": {"parameter": "c", "values": [0.8, 0.95]}
    })");
    const Analysis req[] = {Analysis::sweep};
    const auto r = run(c, req);
    REQUIRE(r.sweep.size() == 2);
    for (const auto& row : r.sweep) {
        CHECK(row.message.empty());
        REQUIRE(row.condition_integral);
        CHECK(*row.condition_integral > 0.0);
        REQUIRE(row.kappa_star);
        REQUIRE(row.epsilon0);
        CHECK(*row.kappa_star > std::sqrt(-*row.epsilon0));
    }
    // Stronger bending binds more tightly.
    CHECK(*r.sweep[1].kappa_star > *r.sweep[0].kappa_star);
    const auto tables = csv_tables(r);
    const auto it = std::find_if(tables.begin(), tables.end(), [](const CsvTable& t) { return t.name == "sweep"; });
    REQUIRE(it != tables.end());
    CHECK(it->header == sweep_header);
    CHECK(it->rows.size() == 2);
}

TEST_CASE("CLI exit codes") {
    const auto dir = scratch("exit");
    const auto good = dir / "good.json";
    spit(good, minimal);
    CHECK(run_cli("--config " + good.string() + " transverse --out " + (dir / "o").string()) == 0);
    CHECK(fs::exists(dir / "o" / "report.json"));

    const auto bad = dir / "bad.json";
    spit(bad, R"({"well": {"a": 1.0, "V0": -1.0}})");
    CHECK(run_cli("--config " + bad.string() + " transverse") == 2);
    spit(bad, "{ not json");
    CHECK(run_cli("--config " + bad.string() + " transverse") == 2);
    CHECK(run_cli("--config " + (dir / "missing.json").string() + " transverse") == 4);
    CHECK(run_cli("--config " + good.string() + " --format xml transverse") == 2);
    CHECK(run_cli("--config " + good.string() + " transverse --out /proc/softguide-no-such-dir") == 4);

    // A straight-check tolerance nobody can meet is a numerical failure.
    spit(bad, R"({"well": {"a": 1.0, "V0": 1.0}, "numerics": {"straight_check_nodes": 8,
                  "straight_check_tolerance": 1e-300}})");
    CHECK(run_cli("--config " + bad.string() + " straight-check --out " + (dir / "t").string()) == 3);
}
