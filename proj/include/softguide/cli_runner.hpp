#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "softguide/bs_engine.hpp"
#include "softguide/curve_geometry.hpp"
#include "softguide/fd_oracle.hpp"
#include "softguide/limit_models.hpp"
#include "softguide/transverse_spectrum.hpp"

namespace softguide {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view report_schema = "softguide-report";
inline constexpr int report_schema_version = 1;

enum class Analysis { validate, transverse, straight_check, exists, bound_states, oracle, limits, sweep };

std::string to_string(Analysis a);
std::optional<Analysis> parse_analysis(std::string_view name);
// Requested analyses plus their prerequisites, in execution order.
std::vector<Analysis> execution_plan(std::span<const Analysis> requested);
// Everything except sweep.
std::vector<Analysis> all_analyses();

struct ProfileConfig {
    CurveFamily family = CurveFamily::zero;
    double amplitude = 0.0;
    double width = 0.0;  // s0 for the bump, sigma for the gaussian
    std::vector<double> table_s, table_gamma;

    [[nodiscard]] CurvatureProfile build() const;
};

enum class WellProfile { flat_bottom, sampled };

struct WellConfig {
    WellProfile profile = WellProfile::flat_bottom;
    double halfwidth = 1.0;
    double depth = 1.0;
    double j_lo = -1.0, j_hi = 1.0;  // J = [j_lo, j_hi]
    std::vector<double> u, v;
    double eps = 1.0;                // scaling V_eps, 1 = unscaled

    [[nodiscard]] TransverseWell build() const;
};

// Zero means "derive from the scenario"; the resolved value is reported.
struct NumericsConfig {
    double s_panel_length = 0.0;
    double bend_panel_length = 0.0;
    double u_panel_length = 0.0;
    int s_order = 8;
    int u_order = 8;
    double truncation = 0.0;
    double condition_tolerance = 0.0;  // 0 disables the ToleranceError check
    int branches = 3;
    int lambda_points = 24;
    int straight_check_nodes = 400;
    double straight_check_tolerance = 1e-4;
    double assumption_window = 0.0;
    int self_test_pairs = 1000;
    double fd_h = 0.0;
    double fd_margin = 0.0;
    double fd_arm_extent = 0.0;
    std::size_t fd_node_cap = 4'000'000;
    int fd_eigenvalues = 4;
    std::vector<double> eps_ladder = default_eps_ladder();
    std::vector<double> hard_wall_depths = {10.0, 100.0, 1000.0};
};

enum class SweepAxis { amplitude, depth, halfwidth, eps };
std::string to_string(SweepAxis a);

struct SweepConfig {
    SweepAxis axis = SweepAxis::amplitude;
    std::vector<double> values;
    bool bound_states = true;
    bool oracle = false;
};

enum class OutputFormat { json, csv, both };
std::string to_string(OutputFormat f);
std::optional<OutputFormat> parse_format(std::string_view name);

struct OutputConfig {
    std::filesystem::path directory = ".";
    OutputFormat format = OutputFormat::json;
    std::string stem = "report";
};

struct ScenarioConfig {
    ProfileConfig profile;
    WellConfig well;
    NumericsConfig numerics;
    std::vector<Analysis> run = {Analysis::transverse};
    std::optional<SweepConfig> sweep;
    OutputConfig output;
};

// Throws ConfigError with line and column for malformed JSON, and naming
// the key for unknown keys and invalid values.
ScenarioConfig parse_config(std::string_view text);
// Throws IoError when the file cannot be read.
ScenarioConfig load_config(const std::filesystem::path& path);
// Resolved configuration, every default spelled out.
Json to_json(const ScenarioConfig& config);

enum class Status { ok, failed, skipped };
std::string to_string(Status s);

struct AnalysisRecord {
    Analysis analysis = Analysis::validate;
    Status status = Status::skipped;
    std::string message;
    int exit_code = 0;  // class of the failure, 0 when ok
    double seconds = 0.0;
};

struct SelfTest {
    std::uint64_t seed = 0;
    int pairs = 0;
    double max_chord_ratio = 0.0;  // max |Gamma(s) - Gamma(s')| / |s - s'|
    bool passed = false;
};

struct EigenSlice {
    std::string name;  // "normal" (through s = 0) or "centerline" (u = 0)
    std::vector<double> t;  // u or s
    std::vector<Vec2> points;
    std::vector<double> values;
};

struct BoundStatesResult {
    BoundStateSearch search;
    std::vector<double> energy_error;  // |E - E_coarse| per state, lower-order companion grid
    std::size_t companion_nodes = 0;
    std::vector<LambdaSample> lambda;
    std::vector<EigenSlice> slices;
};

struct OracleAgreement {
    double energy_bs = 0.0;
    double energy_fd = 0.0;
    double combined_error = 0.0;  // 3 fd error + bs error
    double relative = 0.0;
    bool agrees = false;
};

struct SweepRow {
    double value = 0.0;
    std::optional<double> epsilon0, condition_integral, condition_error, excess, kappa_star, energy_bs, energy_fd,
        fd_error;
    std::string message;  // first failure, empty if none
};

struct RunOptions {
    int threads = 1;
    std::uint64_t seed = 20240917;
    std::string command = "all";
};

struct Resolution {
    NystromGrids grids;
    double S = 0.0;
    double assumption_window = 0.0;
    FdOptions fd;
};

struct RunReport {
    ScenarioConfig config;
    RunOptions options;
    Resolution resolution;
    std::vector<AnalysisRecord> records;

    std::optional<AssumptionReport> assumptions;
    std::optional<SelfTest> self_test;
    std::optional<GroundState> ground;
    std::optional<DeltaCoupling> coupling;
    std::optional<StraightCheckReport> straight;
    std::optional<ConditionIntegral> condition;
    std::optional<OnCurveExcess> excess;
    std::optional<BoundStatesResult> bound_states;
    std::optional<OracleReport> oracle;
    std::optional<OracleAgreement> agreement;
    std::optional<LimitSummary> limits;
    std::vector<SweepRow> sweep;
    double total_seconds = 0.0;

    [[nodiscard]] const AnalysisRecord* record(Analysis a) const;
    // 0 ok, 2 config or assumption failure, 3 tolerance, 1 other.
    [[nodiscard]] int exit_code() const;
};

RunReport run(const ScenarioConfig& config, std::span<const Analysis> requested, const RunOptions& options = {});

// Report as JSON. The "runtime" block holds timing and the worker count;
// everything else depends only on the configuration and the seed.
Json to_json(const RunReport& report);
// Same without the "runtime" block.
Json deterministic_part(const RunReport& report);

struct CsvTable {
    std::string name;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

std::vector<CsvTable> csv_tables(const RunReport& report);
inline const std::vector<std::string> sweep_header = {"c",         "epsilon0",   "condition_integral", "excess_F00",
                                                      "kappa_star", "energy_bs", "energy_fd",          "fd_error"};

// Writes <stem>.json and/or one <table>.csv per table into `directory`.
// Throws IoError naming the path on failure.
std::vector<std::filesystem::path> emit(const RunReport& report, const std::filesystem::path& directory,
                                        OutputFormat format);

// Exit code for an exception escaping the runner.
int exit_code_for(const std::exception& e);

}  // namespace softguide
