#include "softguide/cli_runner.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "softguide/errors.hpp"

namespace softguide {

// ---------------------------------------------------------------- names

namespace {

constexpr std::pair<Analysis, std::string_view> analysis_names[] = {
    {Analysis::validate, "validate"},         {Analysis::transverse, "transverse"},
    {Analysis::straight_check, "straight-check"}, {Analysis::exists, "exists"},
    {Analysis::bound_states, "bound-states"}, {Analysis::oracle, "oracle"},
    {Analysis::limits, "limits"},             {Analysis::sweep, "sweep"},
};

}  // namespace

std::string to_string(Analysis a) {
    for (const auto& [k, name] : analysis_names)
        if (k == a) return std::string(name);
    return "unknown";
}

std::optional<Analysis> parse_analysis(std::string_view name) {
    for (const auto& [k, n] : analysis_names)
        if (n == name) return k;
    return std::nullopt;
}

std::vector<Analysis> all_analyses() {
    return {Analysis::validate, Analysis::transverse,   Analysis::straight_check, Analysis::exists,
            Analysis::bound_states, Analysis::oracle, Analysis::limits};
}

std::vector<Analysis> execution_plan(std::span<const Analysis> requested) {
    std::set<Analysis> want(requested.begin(), requested.end());
    want.insert(Analysis::validate);
    for (Analysis a : requested)
        if (a == Analysis::straight_check || a == Analysis::exists || a == Analysis::bound_states ||
            a == Analysis::oracle)
            want.insert(Analysis::transverse);
    // std::set orders by the enum, which is the dependency order.
    return {want.begin(), want.end()};
}

std::string to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::amplitude: return "c";
        case SweepAxis::depth: return "V0";
        case SweepAxis::halfwidth: return "a";
        case SweepAxis::eps: return "eps";
    }
    return "c";
}

std::string to_string(OutputFormat f) {
    switch (f) {
        case OutputFormat::json: return "json";
        case OutputFormat::csv: return "csv";
        case OutputFormat::both: return "both";
    }
    return "json";
}

std::optional<OutputFormat> parse_format(std::string_view name) {
    if (name == "json") return OutputFormat::json;
    if (name == "csv") return OutputFormat::csv;
    if (name == "both") return OutputFormat::both;
    return std::nullopt;
}

std::string to_string(Status s) {
    switch (s) {
        case Status::ok: return "ok";
        case Status::failed: return "failed";
        case Status::skipped: return "skipped";
    }
    return "skipped";
}

// ---------------------------------------------------------------- builders

CurvatureProfile ProfileConfig::build() const {
    switch (family) {
        case CurveFamily::zero: return CurvatureProfile::zero();
        case CurveFamily::smooth_bump: return CurvatureProfile::smooth_bump(amplitude, width);
        case CurveFamily::gaussian: return CurvatureProfile::gaussian(amplitude, width);
        case CurveFamily::tabulated: return CurvatureProfile::tabulated(table_s, table_gamma);
    }
    return CurvatureProfile::zero();
}

TransverseWell WellConfig::build() const {
    TransverseWell w = profile == WellProfile::flat_bottom ? TransverseWell::flat_bottom(depth, -j_lo, j_hi, halfwidth)
                                                           : TransverseWell::sampled(u, v, halfwidth);
    return eps == 1.0 ? w : scaled_well(w, eps);
}

// ---------------------------------------------------------------- config parsing

namespace {

[[noreturn]] void config_error(const std::string& key, const std::string& what) {
    throw ConfigError(key + ": " + what);
}

class Reader {
public:
    Reader(const Json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) config_error(path_.empty() ? "<root>" : path_, "expected an object");
    }

    void allow(std::initializer_list<std::string_view> keys) const {
        for (const auto& [k, _] : obj_.items())
            if (std::find(keys.begin(), keys.end(), k) == keys.end()) config_error(key(k), "unknown key");
    }

    [[nodiscard]] bool has(std::string_view k) const { return obj_.contains(k); }
    [[nodiscard]] std::string key(std::string_view k) const {
        return path_.empty() ? std::string(k) : path_ + "." + std::string(k);
    }
    [[nodiscard]] const Json& at(std::string_view k) const { return obj_.at(k); }

    void number(std::string_view k, double& out) const {
        if (!has(k)) return;
        const auto& v = obj_.at(k);
        if (!v.is_number()) config_error(key(k), "expected a number");
        out = v.get<double>();
        if (!std::isfinite(out)) config_error(key(k), "must be finite");
    }
    void integer(std::string_view k, int& out) const {
        if (!has(k)) return;
        const auto& v = obj_.at(k);
        if (!v.is_number_integer()) config_error(key(k), "expected an integer");
        out = v.get<int>();
    }
    void count(std::string_view k, std::size_t& out) const {
        if (!has(k)) return;
        const auto& v = obj_.at(k);
        if (!v.is_number_unsigned()) config_error(key(k), "expected a nonnegative integer");
        out = v.get<std::size_t>();
    }
    void boolean(std::string_view k, bool& out) const {
        if (!has(k)) return;
        const auto& v = obj_.at(k);
        if (!v.is_boolean()) config_error(key(k), "expected true or false");
        out = v.get<bool>();
    }
    void text(std::string_view k, std::string& out) const {
        if (!has(k)) return;
        const auto& v = obj_.at(k);
        if (!v.is_string()) config_error(key(k), "expected a string");
        out = v.get<std::string>();
    }
    void numbers(std::string_view k, std::vector<double>& out) const {
        if (!has(k)) return;
        const auto& v = obj_.at(k);
        if (!v.is_array()) config_error(key(k), "expected an array of numbers");
        out.clear();
        for (const auto& x : v) {
            if (!x.is_number()) config_error(key(k), "expected an array of numbers");
            out.push_back(x.get<double>());
            if (!std::isfinite(out.back())) config_error(key(k), "entries must be finite");
        }
    }

private:
    const Json& obj_;
    std::string path_;
};

void require_positive(double x, const std::string& key) {
    if (!(x > 0.0)) config_error(key, "must be positive");
}
void require_nonnegative(double x, const std::string& key) {
    if (!(x >= 0.0)) config_error(key, "must be nonnegative (0 selects the default)");
}

ProfileConfig parse_profile(const Json& j) {
    const Reader r(j, "profile");
    ProfileConfig p;
    std::string family = "zero";
    r.text("family", family);
    if (family == "zero") {
        r.allow({"family"});
        p.family = CurveFamily::zero;
    } else if (family == "smooth_bump") {
        r.allow({"family", "amplitude", "s0"});
        p.family = CurveFamily::smooth_bump;
        if (!r.has("amplitude") || !r.has("s0")) config_error("profile", "smooth_bump needs amplitude and s0");
        r.number("amplitude", p.amplitude);
        r.number("s0", p.width);
        require_positive(p.width, "profile.s0");
    } else if (family == "gaussian") {
        r.allow({"family", "amplitude", "sigma"});
        p.family = CurveFamily::gaussian;
        if (!r.has("amplitude") || !r.has("sigma")) config_error("profile", "gaussian needs amplitude and sigma");
        r.number("amplitude", p.amplitude);
        r.number("sigma", p.width);
        require_positive(p.width, "profile.sigma");
    } else if (family == "tabulated") {
        r.allow({"family", "s", "gamma"});
        p.family = CurveFamily::tabulated;
        r.numbers("s", p.table_s);
        r.numbers("gamma", p.table_gamma);
        if (p.table_s.size() < 2 || p.table_s.size() != p.table_gamma.size())
            config_error("profile.s", "tabulated profile needs at least two (s, gamma) samples of equal length");
        for (std::size_t i = 1; i < p.table_s.size(); ++i)
            if (!(p.table_s[i] > p.table_s[i - 1])) config_error("profile.s", "must increase strictly");
    } else {
        config_error("profile.family", "unknown family '" + family + "' (zero, smooth_bump, gaussian, tabulated)");
    }
    return p;
}

WellConfig parse_well(const Json& j) {
    const Reader r(j, "well");
    r.allow({"profile", "a", "V0", "J", "u", "v", "eps"});
    WellConfig w;
    std::string profile = "flat_bottom";
    r.text("profile", profile);
    if (!r.has("a")) config_error("well.a", "required");
    r.number("a", w.halfwidth);
    require_positive(w.halfwidth, "well.a");
    r.number("eps", w.eps);
    if (!(w.eps > 0.0 && w.eps <= 1.0)) config_error("well.eps", "must lie in (0, 1]");

    if (profile == "flat_bottom") {
        w.profile = WellProfile::flat_bottom;
        if (r.has("u") || r.has("v")) config_error("well", "u and v belong to sampled wells");
        if (!r.has("V0")) config_error("well.V0", "required");
        r.number("V0", w.depth);
        if (!(w.depth > 0.0)) config_error("well.V0", "must be positive, assumption (e) requires a nonzero V >= 0");
        w.j_lo = -w.halfwidth;
        w.j_hi = w.halfwidth;
        if (r.has("J")) {
            std::vector<double> J;
            r.numbers("J", J);
            if (J.size() != 2) config_error("well.J", "expected [lo, hi]");
            w.j_lo = J[0];
            w.j_hi = J[1];
        }
        if (!(w.j_hi > w.j_lo)) config_error("well.J", "needs lo < hi");
        if (w.j_lo < -w.halfwidth || w.j_hi > w.halfwidth)
            config_error("well.J", "must lie inside [-a, a], assumption (e) requires V = 0 for |u| > a");
    } else if (profile == "sampled") {
        w.profile = WellProfile::sampled;
        if (r.has("V0") || r.has("J")) config_error("well", "V0 and J belong to flat_bottom wells");
        r.numbers("u", w.u);
        r.numbers("v", w.v);
        if (w.u.size() < 2 || w.u.size() != w.v.size())
            config_error("well.u", "sampled well needs at least two (u, v) samples of equal length");
        for (std::size_t i = 1; i < w.u.size(); ++i)
            if (!(w.u[i] > w.u[i - 1])) config_error("well.u", "must increase strictly");
        if (w.u.front() < -w.halfwidth || w.u.back() > w.halfwidth)
            config_error("well.u", "samples must lie inside [-a, a], assumption (e)");
        if (std::any_of(w.v.begin(), w.v.end(), [](double x) { return x < 0.0; }))
            config_error("well.v", "negative value, assumption (e) requires V >= 0");
        if (std::all_of(w.v.begin(), w.v.end(), [](double x) { return x == 0.0; }))
            config_error("well.v", "identically zero, assumption (e) requires a nonzero V");
        if (w.v.front() != 0.0 && w.u.front() > -w.halfwidth)
            config_error("well.v", "the interpolant must vanish at the first sample");
        if (w.v.back() != 0.0 && w.u.back() < w.halfwidth)
            config_error("well.v", "the interpolant must vanish at the last sample");
    } else {
        config_error("well.profile", "unknown profile '" + profile + "' (flat_bottom, sampled)");
    }
    return w;
}

NumericsConfig parse_numerics(const Json& j) {
    const Reader r(j, "numerics");
    r.allow({"s_panel_length", "bend_panel_length", "u_panel_length", "s_order", "u_order", "truncation",
             "condition_tolerance", "branches", "lambda_points", "straight_check_nodes", "straight_check_tolerance",
             "assumption_window", "self_test_pairs", "fd_h", "fd_margin", "fd_arm_extent", "fd_node_cap",
             "fd_eigenvalues", "eps_ladder", "hard_wall_depths"});
    NumericsConfig n;
    r.number("s_panel_length", n.s_panel_length);
    r.number("bend_panel_length", n.bend_panel_length);
    r.number("u_panel_length", n.u_panel_length);
    r.integer("s_order", n.s_order);
    r.integer("u_order", n.u_order);
    r.number("truncation", n.truncation);
    r.number("condition_tolerance", n.condition_tolerance);
    r.integer("branches", n.branches);
    r.integer("lambda_points", n.lambda_points);
    r.integer("straight_check_nodes", n.straight_check_nodes);
    r.number("straight_check_tolerance", n.straight_check_tolerance);
    r.number("assumption_window", n.assumption_window);
    r.integer("self_test_pairs", n.self_test_pairs);
    r.number("fd_h", n.fd_h);
    r.number("fd_margin", n.fd_margin);
    r.number("fd_arm_extent", n.fd_arm_extent);
    r.count("fd_node_cap", n.fd_node_cap);
    r.integer("fd_eigenvalues", n.fd_eigenvalues);
    r.numbers("eps_ladder", n.eps_ladder);
    r.numbers("hard_wall_depths", n.hard_wall_depths);

    for (auto [key, value] : {std::pair{"s_panel_length", n.s_panel_length},
                              {"bend_panel_length", n.bend_panel_length},
                              {"u_panel_length", n.u_panel_length},
                              {"truncation", n.truncation},
                              {"condition_tolerance", n.condition_tolerance},
                              {"assumption_window", n.assumption_window},
                              {"fd_h", n.fd_h},
                              {"fd_margin", n.fd_margin},
                              {"fd_arm_extent", n.fd_arm_extent}})
        require_nonnegative(value, std::string("numerics.") + key);
    if (n.s_order < 2 || n.s_order > 32) config_error("numerics.s_order", "must lie in [2, 32]");
    if (n.u_order < 2 || n.u_order > 32) config_error("numerics.u_order", "must lie in [2, 32]");
    if (n.branches < 1) config_error("numerics.branches", "must be at least 1");
    if (n.lambda_points < 2) config_error("numerics.lambda_points", "must be at least 2");
    if (n.straight_check_nodes < 8) config_error("numerics.straight_check_nodes", "must be at least 8");
    require_positive(n.straight_check_tolerance, "numerics.straight_check_tolerance");
    if (n.self_test_pairs < 1) config_error("numerics.self_test_pairs", "must be at least 1");
    if (n.fd_node_cap < 1) config_error("numerics.fd_node_cap", "must be positive");
    if (n.fd_eigenvalues < 1) config_error("numerics.fd_eigenvalues", "must be at least 1");
    if (n.eps_ladder.empty()) config_error("numerics.eps_ladder", "must not be empty");
    for (double e : n.eps_ladder)
        if (!(e > 0.0 && e <= 1.0)) config_error("numerics.eps_ladder", "entries must lie in (0, 1]");
    if (n.hard_wall_depths.empty()) config_error("numerics.hard_wall_depths", "must not be empty");
    for (double d : n.hard_wall_depths) require_positive(d, "numerics.hard_wall_depths");
    return n;
}

std::vector<Analysis> parse_run(const Json& j) {
    std::vector<std::string> names;
    if (j.is_string()) {
        names.push_back(j.get<std::string>());
    } else if (j.is_array()) {
        for (const auto& x : j) {
            if (!x.is_string()) config_error("run", "expected analysis names");
            names.push_back(x.get<std::string>());
        }
    } else {
        config_error("run", "expected a name or an array of names");
    }
    std::vector<Analysis> out;
    for (const auto& n : names) {
        if (n == "all") {
            const auto all = all_analyses();
            out.insert(out.end(), all.begin(), all.end());
        } else if (const auto a = parse_analysis(n)) {
            out.push_back(*a);
        } else {
            config_error("run", "unknown analysis '" + n + "'");
        }
    }
    if (out.empty()) config_error("run", "must name at least one analysis");
    return out;
}

SweepConfig parse_sweep(const Json& j) {
    const Reader r(j, "sweep");
    r.allow({"parameter", "values", "bound_states", "oracle"});
    SweepConfig s;
    std::string p = "c";
    r.text("parameter", p);
    if (p == "c") s.axis = SweepAxis::amplitude;
    else if (p == "V0") s.axis = SweepAxis::depth;
    else if (p == "a") s.axis = SweepAxis::halfwidth;
    else if (p == "eps") s.axis = SweepAxis::eps;
    else config_error("sweep.parameter", "unknown parameter '" + p + "' (c, V0, a, eps)");
    r.numbers("values", s.values);
    if (s.values.empty()) config_error("sweep.values", "must not be empty");
    r.boolean("bound_states", s.bound_states);
    r.boolean("oracle", s.oracle);
    return s;
}

OutputConfig parse_output(const Json& j) {
    const Reader r(j, "output");
    r.allow({"directory", "format", "stem"});
    OutputConfig o;
    std::string dir = ".", format = "json";
    r.text("directory", dir);
    r.text("format", format);
    r.text("stem", o.stem);
    o.directory = dir;
    const auto f = parse_format(format);
    if (!f) config_error("output.format", "expected json, csv or both");
    o.format = *f;
    if (o.stem.empty() || o.stem.find('/') != std::string::npos) config_error("output.stem", "must be a plain file name");
    return o;
}

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

// Assumption (d) on the configured (possibly scaled) strip.
void check_strip_fits(const ProfileConfig& p, const WellConfig& w, const std::string& key) {
    const double a = w.halfwidth * w.eps;
    const double product = a * p.build().sup_abs();
    if (!(product < 1.0)) {
        std::ostringstream msg;
        msg.precision(6);
        msg << "a * sup|gamma| = " << product << " >= 1 violates assumption (d)";
        config_error(key, msg.str());
    }
}

}  // namespace

ScenarioConfig parse_config(std::string_view text) {
    Json root;
    try {
        root = Json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::parse_error& e) {
        const auto [line, col] = line_column(text, e.byte > 0 ? e.byte - 1 : 0);
        std::string what = e.what();
        if (const auto pos = what.find("parse error"); pos != std::string::npos) what = what.substr(pos);
        throw ConfigError("parse error at line " + std::to_string(line) + ", column " + std::to_string(col) + ": " +
                          what);
    }
    const Reader r(root, "");
    r.allow({"description", "profile", "well", "numerics", "run", "sweep", "output"});
    if (r.has("description") && !root.at("description").is_string()) config_error("description", "expected a string");

    ScenarioConfig c;
    if (r.has("profile")) c.profile = parse_profile(root.at("profile"));
    if (!r.has("well")) config_error("well", "required");
    c.well = parse_well(root.at("well"));
    if (r.has("numerics")) c.numerics = parse_numerics(root.at("numerics"));
    if (r.has("run")) c.run = parse_run(root.at("run"));
    if (r.has("sweep")) c.sweep = parse_sweep(root.at("sweep"));
    if (r.has("output")) c.output = parse_output(root.at("output"));

    try {
        (void)c.profile.build();
        (void)c.well.build();
    } catch (const DomainError& e) {
        throw ConfigError(std::string("profile/well: ") + e.what());
    }
    check_strip_fits(c.profile, c.well, "well.a");

    if (c.sweep) {
        const auto& s = *c.sweep;
        for (double v : s.values) {
            ScenarioConfig probe = c;
            switch (s.axis) {
                case SweepAxis::amplitude:
                    if (c.profile.family != CurveFamily::smooth_bump && c.profile.family != CurveFamily::gaussian)
                        config_error("sweep.parameter", "c needs a smooth_bump or gaussian profile");
                    probe.profile.amplitude = v;
                    break;
                case SweepAxis::depth:
                    if (c.well.profile != WellProfile::flat_bottom)
                        config_error("sweep.parameter", "V0 needs a flat_bottom well");
                    if (!(v > 0.0)) config_error("sweep.values", "V0 must be positive, assumption (e)");
                    break;
                case SweepAxis::halfwidth:
                    if (!(v > 0.0)) config_error("sweep.values", "a must be positive");
                    probe.well.halfwidth = v;
                    break;
                case SweepAxis::eps:
                    if (!(v > 0.0 && v <= 1.0)) config_error("sweep.values", "eps must lie in (0, 1]");
                    probe.well.eps = v;
                    break;
            }
            check_strip_fits(probe.profile, probe.well, "sweep.values");
        }
    }
    const bool wants_sweep = std::find(c.run.begin(), c.run.end(), Analysis::sweep) != c.run.end();
    if (wants_sweep && !c.sweep) config_error("sweep", "required when run includes sweep");
    return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read config " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("cannot read config " + path.string());
    try {
        return parse_config(buf.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------- JSON helpers

namespace {

Json num(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }
Json num(const std::optional<double>& x) { return x ? num(*x) : Json(nullptr); }

Json quantity(double value, std::string_view method, std::optional<double> error = std::nullopt) {
    Json q;
    q["value"] = num(value);
    q["method"] = method;
    q["error"] = num(error);
    return q;
}

Json array(const std::vector<double>& v) {
    Json a = Json::array();
    for (double x : v) a.push_back(num(x));
    return a;
}

Json grids_json(const NystromGrids& g) {
    return Json{{"s_panel_length", num(g.s_panel_length)},
                {"bend_panel_length", num(g.bend_panel_length)},
                {"u_panel_length", num(g.u_panel_length)},
                {"s_order", g.s_order},
                {"u_order", g.u_order},
                {"subdivision", g.subdivision}};
}

Json grid_json(const BoxGrid& g) {
    return Json{{"x0", num(g.x0)}, {"y0", num(g.y0)}, {"h", num(g.h)}, {"nx", g.nx}, {"ny", g.ny}};
}

}  // namespace

Json to_json(const ScenarioConfig& c) {
    Json j;
    Json p;
    p["family"] = to_string(c.profile.family);
    switch (c.profile.family) {
        case CurveFamily::zero: break;
        case CurveFamily::smooth_bump:
            p["amplitude"] = num(c.profile.amplitude);
            p["s0"] = num(c.profile.width);
            break;
        case CurveFamily::gaussian:
            p["amplitude"] = num(c.profile.amplitude);
            p["sigma"] = num(c.profile.width);
            break;
        case CurveFamily::tabulated:
            p["s"] = array(c.profile.table_s);
            p["gamma"] = array(c.profile.table_gamma);
            break;
    }
    j["profile"] = p;

    Json w;
    w["profile"] = c.well.profile == WellProfile::flat_bottom ? "flat_bottom" : "sampled";
    w["a"] = num(c.well.halfwidth);
    if (c.well.profile == WellProfile::flat_bottom) {
        w["V0"] = num(c.well.depth);
        w["J"] = Json::array({num(c.well.j_lo), num(c.well.j_hi)});
    } else {
        w["u"] = array(c.well.u);
        w["v"] = array(c.well.v);
    }
    w["eps"] = num(c.well.eps);
    j["well"] = w;

    const auto& n = c.numerics;
    j["numerics"] = Json{{"s_panel_length", num(n.s_panel_length)},
                         {"bend_panel_length", num(n.bend_panel_length)},
                         {"u_panel_length", num(n.u_panel_length)},
                         {"s_order", n.s_order},
                         {"u_order", n.u_order},
                         {"truncation", num(n.truncation)},
                         {"condition_tolerance", num(n.condition_tolerance)},
                         {"branches", n.branches},
                         {"lambda_points", n.lambda_points},
                         {"straight_check_nodes", n.straight_check_nodes},
                         {"straight_check_tolerance", num(n.straight_check_tolerance)},
                         {"assumption_window", num(n.assumption_window)},
                         {"self_test_pairs", n.self_test_pairs},
                         {"fd_h", num(n.fd_h)},
                         {"fd_margin", num(n.fd_margin)},
                         {"fd_arm_extent", num(n.fd_arm_extent)},
                         {"fd_node_cap", n.fd_node_cap},
                         {"fd_eigenvalues", n.fd_eigenvalues},
                         {"eps_ladder", array(n.eps_ladder)},
                         {"hard_wall_depths", array(n.hard_wall_depths)}};

    Json run = Json::array();
    for (Analysis a : c.run) run.push_back(to_string(a));
    j["run"] = run;
    if (c.sweep) {
        j["sweep"] = Json{{"parameter", to_string(c.sweep->axis)},
                          {"values", array(c.sweep->values)},
                          {"bound_states", c.sweep->bound_states},
                          {"oracle", c.sweep->oracle}};
    }
    j["output"] = Json{{"directory", c.output.directory.string()},
                       {"format", to_string(c.output.format)},
                       {"stem", c.output.stem}};
    return j;
}

// ---------------------------------------------------------------- run

const AnalysisRecord* RunReport::record(Analysis a) const {
    for (const auto& r : records)
        if (r.analysis == a) return &r;
    return nullptr;
}

int RunReport::exit_code() const {
    if (const auto* v = record(Analysis::validate); v && v->status == Status::failed) return v->exit_code;
    bool tolerance = false;
    for (const auto& r : records) {
        if (r.status != Status::failed) continue;
        if (r.exit_code == 3) tolerance = true;
        else return r.exit_code == 0 ? 1 : r.exit_code;
    }
    return tolerance ? 3 : 0;
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return 2;
    if (dynamic_cast<const ToleranceError*>(&e)) return 3;
    if (dynamic_cast<const IoError*>(&e)) return 4;
    return 1;
}

namespace {

struct Scenario {
    CurvatureProfile profile;
    TransverseWell well;
};

Scenario build_scenario(const ScenarioConfig& c) { return {c.profile.build(), c.well.build()}; }

NystromGrids configured_grids(const NumericsConfig& n, int threads) {
    NystromGrids g;
    g.s_panel_length = n.s_panel_length;
    g.bend_panel_length = n.bend_panel_length;
    g.u_panel_length = n.u_panel_length;
    g.s_order = n.s_order;
    g.u_order = n.u_order;
    g.threads = threads;
    return g;
}

FdOptions configured_fd(const NumericsConfig& n, int threads) {
    FdOptions o;
    o.h = n.fd_h;
    o.margin = n.fd_margin;
    o.arm_extent = n.fd_arm_extent;
    o.node_cap = n.fd_node_cap;
    o.eigenvalues = n.fd_eigenvalues;
    o.threads = threads;
    return o;
}

double truncation_for(const NumericsConfig& n, const CurvatureProfile& p, double kappa0) {
    return n.truncation > 0.0 ? n.truncation : default_truncation(p, kappa0);
}

SelfTest contraction_self_test(const CurvatureProfile& profile, double window, int pairs, std::uint64_t seed) {
    SelfTest t;
    t.seed = seed;
    t.pairs = pairs;
    double step = std::min(0.01, window / 1000.0);
    if (profile.sup_abs() > 0.0) step = std::min(step, 0.05 / profile.sup_abs());
    const PlanarCurve curve(profile, 0.0, {}, ArcGrid{-window, window, step});
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> pick(-window, window);
    for (int k = 0; k < pairs; ++k) {
        const double s = pick(rng), sp = pick(rng);
        if (s == sp) continue;
        t.max_chord_ratio = std::max(t.max_chord_ratio, norm(curve.position(s) - curve.position(sp)) / std::abs(s - sp));
    }
    t.passed = t.max_chord_ratio <= 1.0 + 1e-12;
    return t;
}

std::string failed_assumptions(const AssumptionReport& r) {
    std::string out;
    auto add = [&](bool ok, const char* what) {
        if (ok) return;
        if (!out.empty()) out += ", ";
        out += what;
    };
    add(r.smooth, "(a) smoothness");
    add(r.decay, "(b) decay");
    add(r.injective, "(c) injectivity proxy");
    add(r.strip_fits, "(d) a sup|gamma| < 1");
    return out;
}

BoundStatesResult bound_state_analysis(const Scenario& sc, const GroundState& state, const Resolution& res,
                                       const NumericsConfig& n) {
    BoundStatesResult out;
    const auto disc = BSDiscretization::build(sc.profile, sc.well, res.S, res.grids);
    out.search = find_bound_states(disc, sc.well, state, n.branches);

    // Lower-order companion for an a posteriori energy error.
    NystromGrids low = res.grids;
    low.s_order = std::max(4, low.s_order - 2);
    low.u_order = std::max(4, low.u_order - 2);
    const auto companion = BSDiscretization::build(sc.profile, sc.well, res.S, low);
    out.companion_nodes = companion.size();
    const auto rough = find_bound_states(companion, sc.well, state, n.branches);
    for (const auto& st : out.search.states) {
        double err = std::numeric_limits<double>::infinity();
        for (const auto& r : rough.states)
            if (r.branch == st.branch) err = std::abs(st.energy - r.energy);
        out.energy_error.push_back(err);
    }

    out.lambda = lambda_curve(disc, out.search.kappa_lo, out.search.kappa_hi, n.lambda_points);

    if (!out.search.states.empty()) {
        const auto& st = out.search.states.front();
        const auto& curve = disc.curve();
        const double a = sc.well.halfwidth();
        EigenSlice normal{"normal", {}, {}, {}};
        const double reach = a + 4.0 / st.kappa;
        constexpr int nu = 201;
        for (int k = 0; k < nu; ++k) {
            const double u = -reach + 2.0 * reach * k / (nu - 1);
            normal.t.push_back(u);
            normal.points.push_back(curve.position(0.0) + u * curve.normal(0.0));
        }
        normal.values = disc.reconstruct(st.eigenvector, st.kappa, normal.points);
        EigenSlice centre{"centerline", {}, {}, {}};
        constexpr int ns = 401;
        for (int k = 0; k < ns; ++k) {
            const double s = -res.S + 2.0 * res.S * k / (ns - 1);
            centre.t.push_back(s);
            centre.points.push_back(curve.position(s));
        }
        centre.values = disc.reconstruct(st.eigenvector, st.kappa, centre.points);
        out.slices.push_back(std::move(normal));
        out.slices.push_back(std::move(centre));
    }
    return out;
}

SweepRow sweep_row(const ScenarioConfig& base, double value, int threads) {
    SweepRow row;
    row.value = value;
    ScenarioConfig c = base;
    const auto& s = *base.sweep;
    switch (s.axis) {
        case SweepAxis::amplitude: c.profile.amplitude = value; break;
        case SweepAxis::depth: c.well.depth = value; break;
        case SweepAxis::halfwidth:
            // A channel filling the strip keeps filling it.
            if (c.well.profile == WellProfile::flat_bottom && c.well.j_lo == -c.well.halfwidth &&
                c.well.j_hi == c.well.halfwidth) {
                c.well.j_lo = -value;
                c.well.j_hi = value;
            }
            c.well.halfwidth = value;
            break;
        case SweepAxis::eps: c.well.eps = value; break;
    }
    try {
        const auto sc = build_scenario(c);
        const auto state = solve_ground_state(sc.well);
        row.epsilon0 = state.epsilon0;
        const double S = truncation_for(c.numerics, sc.profile, state.kappa0);
        const auto grids = configured_grids(c.numerics, threads);
        const auto ci = condition_integral(sc.profile, sc.well, state, S, c.numerics.condition_tolerance, grids);
        row.condition_integral = ci.value;
        row.condition_error = ci.error_estimate;
        row.excess = on_curve_excess(sc.profile, state.kappa0, S, 0.0, threads).value;
        if (s.bound_states) {
            const auto found = find_bound_states(sc.profile, sc.well, state, S, grids, 1);
            if (!found.states.empty()) {
                row.kappa_star = found.states.front().kappa;
                row.energy_bs = found.states.front().energy;
            } else if (ci.certified && ci.value > 0.0) {
                row.message = "existence certified but no bound state resolved at S = " + std::to_string(S);
            }
        }
        if (s.oracle) {
            const auto rep = discrete_spectrum_report(sc.profile, sc.well, state, configured_fd(c.numerics, threads));
            if (!rep.energies.empty()) {
                row.energy_fd = rep.energies.front().extrapolated;
                row.fd_error = rep.energies.front().error;
            }
        }
    } catch (const std::exception& e) {
        row.message = e.what();
    }
    return row;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

RunReport run(const ScenarioConfig& config, std::span<const Analysis> requested, const RunOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    RunReport rep;
    rep.config = config;
    rep.options = options;
    const int threads = std::max(1, options.threads);
    const auto plan = execution_plan(requested);
    const auto sc = build_scenario(config);
    const auto& n = config.numerics;

    rep.resolution.grids = configured_grids(n, threads);
    rep.resolution.fd = configured_fd(n, threads);
    rep.resolution.assumption_window =
        n.assumption_window > 0.0 ? n.assumption_window : sc.profile.effective_extent() + 40.0 * sc.well.halfwidth();

    bool fatal = false;
    for (Analysis a : plan) {
        AnalysisRecord rec;
        rec.analysis = a;
        const auto t0 = std::chrono::steady_clock::now();
        const bool needs_ground =
            a == Analysis::straight_check || a == Analysis::exists || a == Analysis::bound_states || a == Analysis::oracle;
        if (fatal) {
            rec.message = "skipped after validation failure";
        } else if (needs_ground && !rep.ground) {
            rec.message = "requires transverse";
        } else {
            try {
                rec.status = Status::ok;
                switch (a) {
                    case Analysis::validate: {
                        rep.assumptions =
                            validate_assumptions(sc.profile, sc.well.halfwidth(), rep.resolution.assumption_window);
                        rep.self_test = contraction_self_test(sc.profile, rep.resolution.assumption_window,
                                                              n.self_test_pairs, options.seed);
                        if (!rep.assumptions->all_pass()) {
                            rec.status = Status::failed;
                            rec.exit_code = 2;
                            rec.message = "assumption check failed: " + failed_assumptions(*rep.assumptions);
                        } else if (!rep.self_test->passed) {
                            rec.status = Status::failed;
                            rec.exit_code = 1;
                            rec.message = "arc-length contraction self-test failed";
                        }
                        fatal = rec.status == Status::failed;
                        break;
                    }
                    case Analysis::transverse: {
                        rep.ground = solve_ground_state(sc.well);
                        rep.coupling = delta_coupling(sc.well);
                        rep.resolution.grids = rep.resolution.grids.resolved(rep.ground->kappa0, sc.profile);
                        rep.resolution.S = truncation_for(n, sc.profile, rep.ground->kappa0);
                        break;
                    }
                    case Analysis::straight_check: {
                        rep.straight = straight_bs_check(sc.well, *rep.ground, n.straight_check_nodes);
                        if (!rep.straight->passed(n.straight_check_tolerance)) {
                            rec.status = Status::failed;
                            rec.exit_code = 3;
                            rec.message = "|lambda_max - 1| = " + std::to_string(rep.straight->residual) +
                                          " exceeds " + std::to_string(n.straight_check_tolerance);
                        }
                        break;
                    }
                    case Analysis::exists: {
                        rep.condition = condition_integral(sc.profile, sc.well, *rep.ground, rep.resolution.S,
                                                           n.condition_tolerance, configured_grids(n, threads));
                        rep.excess = on_curve_excess(sc.profile, rep.ground->kappa0, rep.resolution.S, 0.0, threads);
                        break;
                    }
                    case Analysis::bound_states: {
                        rep.bound_states = bound_state_analysis(sc, *rep.ground, rep.resolution, n);
                        // Existence is certified but the truncated operator lost the state: the
                        // binding is too weak for [-S, S], which is a resolution failure.
                        if (rep.condition && rep.condition->certified && rep.condition->value > 0.0 &&
                            rep.bound_states->search.states.empty()) {
                            rec.status = Status::failed;
                            rec.exit_code = 3;
                            rec.message = "existence certified but no bound state resolved at S = " +
                                          std::to_string(rep.resolution.S) + "; raise numerics.truncation";
                        }
                        break;
                    }
                    case Analysis::oracle: {
                        rep.oracle = discrete_spectrum_report(sc.profile, sc.well, *rep.ground, rep.resolution.fd);
                        rep.oracle->ground_vector.resize(0);
                        rep.resolution.fd.h = rep.oracle->fine.h;
                        rep.resolution.fd.margin = rep.oracle->margin;
                        rep.resolution.fd.arm_extent = rep.oracle->arm_extent;
                        if (rep.bound_states && !rep.bound_states->search.states.empty() &&
                            !rep.oracle->energies.empty()) {
                            OracleAgreement g;
                            g.energy_bs = rep.bound_states->search.states.front().energy;
                            g.energy_fd = rep.oracle->energies.front().extrapolated;
                            g.combined_error =
                                3.0 * rep.oracle->energies.front().error + rep.bound_states->energy_error.front();
                            const double diff = std::abs(g.energy_bs - g.energy_fd);
                            g.relative = diff / std::abs(g.energy_fd);
                            g.agrees = diff <= g.combined_error && g.relative <= 1e-2;
                            rep.agreement = g;
                            if (!g.agrees) {
                                rec.status = Status::failed;
                                rec.exit_code = 3;
                                rec.message = "BS and FD energies disagree beyond the combined error bars";
                            }
                        }
                        break;
                    }
                    case Analysis::limits: {
                        rep.limits = limit_summary(sc.well, n.eps_ladder, threads);
                        if (sc.well.kind() == WellKind::flat_bottom)
                            rep.limits->hard_wall =
                                hard_wall_trend(sc.well.a1(), sc.well.a2(), sc.well.halfwidth(), n.hard_wall_depths);
                        break;
                    }
                    case Analysis::sweep: {
                        if (!config.sweep) throw ConfigError("sweep: block required");
                        for (double v : config.sweep->values) rep.sweep.push_back(sweep_row(config, v, threads));
                        for (const auto& row : rep.sweep)
                            if (!row.message.empty()) {
                                rec.status = Status::failed;
                                rec.exit_code = 3;
                                rec.message = "sweep value " + std::to_string(row.value) + ": " + row.message;
                                break;
                            }
                        break;
                    }
                }
            } catch (const std::exception& e) {
                rec.status = Status::failed;
                rec.exit_code = exit_code_for(e);
                rec.message = e.what();
                if (a == Analysis::validate) fatal = true;
            }
        }
        rec.seconds = seconds_since(t0);
        rep.records.push_back(std::move(rec));
    }
    rep.total_seconds = seconds_since(start);
    return rep;
}

// ---------------------------------------------------------------- report JSON

Json deterministic_part(const RunReport& r) {
    Json j;
    j["schema"] = report_schema;
    j["schema_version"] = report_schema_version;
    j["command"] = r.options.command;
    j["seed"] = r.options.seed;
    j["config"] = to_json(r.config);

    Json res;
    res["nystrom"] = grids_json(r.resolution.grids);
    res["truncation_S"] = num(r.resolution.S);
    res["assumption_window"] = num(r.resolution.assumption_window);
    res["fd"] = Json{{"h", num(r.resolution.fd.h)},
                     {"margin", num(r.resolution.fd.margin)},
                     {"arm_extent", num(r.resolution.fd.arm_extent)},
                     {"node_cap", r.resolution.fd.node_cap},
                     {"eigenvalues", r.resolution.fd.eigenvalues}};
    j["resolution"] = res;

    Json an;
    for (const auto& rec : r.records)
        an[to_string(rec.analysis)] =
            Json{{"status", to_string(rec.status)}, {"exit_code", rec.exit_code}, {"message", rec.message}};
    j["analyses"] = an;

    if (r.assumptions) {
        const auto& a = *r.assumptions;
        Json x{{"smooth", a.smooth},
               {"decay", a.decay},
               {"injective", a.injective},
               {"strip_fits", a.strip_fits},
               {"sup_curvature", num(a.sup_curvature)},
               {"product", num(a.product)},
               {"injectivity_margin", num(a.injectivity_margin)},
               {"min_chord", num(a.min_chord)},
               {"l_min", num(a.l_min)},
               {"window", num(a.window)},
               {"compact_support", a.compact_support}};
        Json decay = Json::array();
        for (const auto& d : a.decay_samples)
            decay.push_back(Json{{"s", num(d.s)}, {"gamma", num(d.gamma)}, {"first", num(d.first)},
                                 {"second", num(d.second)}});
        x["decay_samples"] = decay;
        if (r.self_test)
            x["contraction_self_test"] = Json{{"seed", r.self_test->seed},
                                              {"pairs", r.self_test->pairs},
                                              {"max_chord_ratio", num(r.self_test->max_chord_ratio)},
                                              {"passed", r.self_test->passed}};
        j["assumptions"] = x;
    }

    if (r.ground) {
        const auto& g = *r.ground;
        const std::string method = g.method == "analytic" ? "analytic" : "fd";
        Json t;
        t["epsilon0"] = quantity(g.epsilon0, method, g.error_estimate);
        t["kappa0"] = quantity(g.kappa0, method, g.error_estimate / (2.0 * g.kappa0));
        t["solver"] = g.method;
        t["tail_left"] = num(g.tail_left);
        t["tail_right"] = num(g.tail_right);
        if (r.coupling) {
            t["alpha"] = quantity(r.coupling->alpha, "analytic");
            t["delta_threshold"] = quantity(r.coupling->threshold, "analytic");
        }
        j["transverse"] = t;
    }

    if (r.straight) {
        const auto& s = *r.straight;
        Json line = Json::array();
        for (const auto& p : s.spectrum_line) line.push_back(Json{{"p", num(p.p)}, {"kappa", num(p.kappa)}, {"lambda", num(p.lambda)}});
        j["straight_check"] = Json{{"lambda_max", quantity(s.lambda_max, "nystrom", s.residual)},
                                   {"residual", num(s.residual)},
                                   {"cosine_similarity", num(s.cosine_similarity)},
                                   {"nodes", s.nodes},
                                   {"passed", s.passed(r.config.numerics.straight_check_tolerance)},
                                   {"spectrum_line", line}};
    }

    if (r.condition || r.excess) {
        Json e;
        if (r.condition) {
            const auto& c = *r.condition;
            e["condition_integral"] = quantity(c.value, "nystrom", c.error_estimate);
            e["coarse_value"] = num(c.coarse_value);
            e["normalization"] = num(c.normalization);
            e["ratio"] = num(c.ratio);
            e["truncation_bound"] = num(c.truncation_bound);
            e["S"] = num(c.S);
            e["coarse_nodes"] = c.coarse_nodes;
            e["fine_nodes"] = c.fine_nodes;
            e["certified"] = c.certified;
        }
        if (r.excess) {
            const auto& x = *r.excess;
            e["on_curve_excess"] = quantity(x.value, "analytic", x.error_estimate);
            e["on_curve_excess_coarse"] = num(x.coarse_value);
            e["on_curve_excess_min_integrand"] = num(x.min_integrand);
        }
        j["exists"] = e;
    }

    if (r.bound_states) {
        const auto& b = *r.bound_states;
        Json states = Json::array();
        for (std::size_t i = 0; i < b.search.states.size(); ++i) {
            const auto& st = b.search.states[i];
            const double err = b.energy_error[i];
            states.push_back(Json{{"branch", st.branch},
                                  {"kappa", quantity(st.kappa, "nystrom", err / (2.0 * st.kappa))},
                                  {"energy", quantity(st.energy, "nystrom", err)},
                                  {"lambda_residual", num(st.lambda_residual)}});
        }
        Json lam = Json::array();
        for (const auto& p : b.lambda) lam.push_back(Json::array({num(p.kappa), num(p.lambda)}));
        j["bound_states"] = Json{{"count", b.search.states.size()},
                                 {"states", states},
                                 {"kappa_lo", num(b.search.kappa_lo)},
                                 {"kappa_hi", num(b.search.kappa_hi)},
                                 {"lambda_at_start", array(b.search.lambda_at_start)},
                                 {"nodes", b.search.nodes},
                                 {"companion_nodes", b.companion_nodes},
                                 {"S", num(b.search.S)},
                                 {"evaluations", b.search.evaluations},
                                 {"lambda_curve", lam}};
    }

    if (r.oracle) {
        const auto& o = *r.oracle;
        Json levels = Json::array();
        for (std::size_t i = 0; i < o.energies.size(); ++i) {
            const auto& e = o.energies[i];
            levels.push_back(Json{{"index", i},
                                  {"energy", quantity(e.extrapolated, "fd", e.error)},
                                  {"fine", num(o.fine.energies[i])},
                                  {"coarse", num(o.coarse.energies[i])},
                                  {"fine_residual", num(o.fine.residuals[i])},
                                  {"verdict", to_string(e.verdict)}});
        }
        Json x{{"epsilon0", num(o.epsilon0)},
               {"verdict", to_string(o.verdict)},
               {"count_below", o.count_below},
               {"levels", levels},
               {"fine", Json{{"h", num(o.fine.h)}, {"nodes", o.fine.nodes}}},
               {"coarse", Json{{"h", num(o.coarse.h)}, {"nodes", o.coarse.nodes}}},
               {"fine_grid", grid_json(o.fine_grid)},
               {"margin", num(o.margin)},
               {"arm_extent", num(o.arm_extent)}};
        if (r.bound_states)
            x["count_consistent"] = static_cast<std::size_t>(o.count_below) == r.bound_states->search.states.size();
        if (r.agreement) {
            const auto& g = *r.agreement;
            x["agreement"] = Json{{"energy_bs", num(g.energy_bs)},
                                  {"energy_fd", num(g.energy_fd)},
                                  {"combined_error", num(g.combined_error)},
                                  {"relative", num(g.relative)},
                                  {"agrees", g.agrees}};
        }
        j["oracle"] = x;
    }

    if (r.limits) {
        const auto& l = *r.limits;
        Json rows = Json::array();
        for (const auto& row : l.delta.rows)
            rows.push_back(Json{{"eps", num(row.eps)},
                                {"epsilon0", num(row.epsilon0)},
                                {"gap", num(row.gap)},
                                {"above_threshold", row.above_threshold}});
        Json hw = Json::array();
        for (const auto& row : l.hard_wall.rows)
            hw.push_back(Json{{"V0", num(row.depth)}, {"epsilon0", num(row.epsilon0)}, {"shifted", num(row.shifted)}});
        j["limits"] = Json{{"alpha", quantity(l.delta.coupling.alpha, "analytic")},
                           {"delta_threshold", quantity(l.delta.coupling.threshold, "analytic")},
                           {"dirichlet_threshold", quantity(l.dirichlet, "analytic")},
                           {"delta_ladder", rows},
                           {"gaps_decreasing", l.delta.gaps_decreasing},
                           {"final_ratio", num(l.delta.final_ratio)},
                           {"hard_wall", Json{{"dirichlet", num(l.hard_wall.dirichlet)},
                                              {"rows", hw},
                                              {"increasing", l.hard_wall.increasing},
                                              {"below_dirichlet", l.hard_wall.below_dirichlet}}}};
    }

    if (!r.sweep.empty()) {
        Json rows = Json::array();
        for (const auto& row : r.sweep)
            rows.push_back(Json{{"value", num(row.value)},
                                {"epsilon0", num(row.epsilon0)},
                                {"condition_integral", num(row.condition_integral)},
                                {"condition_error", num(row.condition_error)},
                                {"excess_F00", num(row.excess)},
                                {"kappa_star", num(row.kappa_star)},
                                {"energy_bs", num(row.energy_bs)},
                                {"energy_fd", num(row.energy_fd)},
                                {"fd_error", num(row.fd_error)},
                                {"message", row.message}});
        j["sweep"] = Json{{"parameter", to_string(r.config.sweep->axis)}, {"rows", rows}};
    }
    j["exit_code"] = r.exit_code();
    return j;
}

Json to_json(const RunReport& r) {
    Json j = deterministic_part(r);
    Json seconds;
    for (const auto& rec : r.records) seconds[to_string(rec.analysis)] = rec.seconds;
    j["runtime"] = Json{{"threads", r.options.threads}, {"seconds", seconds}, {"total_seconds", r.total_seconds}};
    return j;
}

// ---------------------------------------------------------------- CSV

namespace {

std::string cell(double x) {
    if (!std::isfinite(x)) return "";
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return ec == std::errc{} ? std::string(buf, end) : std::string();
}
std::string cell(const std::optional<double>& x) { return x ? cell(*x) : std::string(); }
std::string cell(std::size_t x) { return std::to_string(x); }
std::string cell(int x) { return std::to_string(x); }
std::string cell(bool x) { return x ? "true" : "false"; }

std::string quoted(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

std::vector<CsvTable> csv_tables(const RunReport& r) {
    std::vector<CsvTable> out;
    if (r.assumptions) {
        const auto& a = *r.assumptions;
        CsvTable t{"assumptions", {"check", "passed", "value"}, {}};
        t.rows.push_back({"a_smooth", cell(a.smooth), ""});
        t.rows.push_back({"b_decay", cell(a.decay), ""});
        t.rows.push_back({"c_injective", cell(a.injective), cell(a.injectivity_margin)});
        t.rows.push_back({"d_strip_fits", cell(a.strip_fits), cell(a.product)});
        if (r.self_test)
            t.rows.push_back({"contraction_self_test", cell(r.self_test->passed), cell(r.self_test->max_chord_ratio)});
        out.push_back(std::move(t));
    }
    if (r.ground) {
        const auto& g = *r.ground;
        out.push_back({"transverse",
                       {"epsilon0", "kappa0", "error_estimate", "method"},
                       {{cell(g.epsilon0), cell(g.kappa0), cell(g.error_estimate), g.method}}});
        CsvTable phi{"phi0", {"u", "phi0"}, {}};
        for (std::size_t i = 0; i < g.u.size(); ++i) phi.rows.push_back({cell(g.u[i]), cell(g.phi[i])});
        out.push_back(std::move(phi));
    }
    if (r.straight) {
        CsvTable t{"straight_check", {"p", "kappa", "lambda"}, {}};
        for (const auto& p : r.straight->spectrum_line) t.rows.push_back({cell(p.p), cell(p.kappa), cell(p.lambda)});
        out.push_back(std::move(t));
    }
    if (r.condition || r.excess) {
        CsvTable t{"exists", {"quantity", "value", "error_estimate", "method"}, {}};
        if (r.condition)
            t.rows.push_back({"condition_integral", cell(r.condition->value), cell(r.condition->error_estimate),
                              "nystrom"});
        if (r.excess)
            t.rows.push_back({"on_curve_excess", cell(r.excess->value), cell(r.excess->error_estimate), "analytic"});
        out.push_back(std::move(t));
    }
    if (r.bound_states) {
        const auto& b = *r.bound_states;
        CsvTable t{"bound_states", {"branch", "kappa_star", "energy", "energy_error", "lambda_residual"}, {}};
        for (std::size_t i = 0; i < b.search.states.size(); ++i) {
            const auto& st = b.search.states[i];
            t.rows.push_back({cell(st.branch), cell(st.kappa), cell(st.energy), cell(b.energy_error[i]),
                              cell(st.lambda_residual)});
        }
        out.push_back(std::move(t));
        CsvTable lam{"lambda_curve", {"kappa", "lambda"}, {}};
        for (const auto& p : b.lambda) lam.rows.push_back({cell(p.kappa), cell(p.lambda)});
        out.push_back(std::move(lam));
        for (const auto& sl : b.slices) {
            CsvTable s{"eigenfunction_" + sl.name, {sl.name == "normal" ? "u" : "s", "x", "y", "psi"}, {}};
            for (std::size_t i = 0; i < sl.t.size(); ++i)
                s.rows.push_back({cell(sl.t[i]), cell(sl.points[i].x), cell(sl.points[i].y), cell(sl.values[i])});
            out.push_back(std::move(s));
        }
    }
    if (r.oracle) {
        const auto& o = *r.oracle;
        CsvTable t{"oracle", {"index", "energy_fine", "energy_coarse", "extrapolated", "error", "verdict"}, {}};
        for (std::size_t i = 0; i < o.energies.size(); ++i)
            t.rows.push_back({cell(i), cell(o.fine.energies[i]), cell(o.coarse.energies[i]),
                              cell(o.energies[i].extrapolated), cell(o.energies[i].error),
                              to_string(o.energies[i].verdict)});
        out.push_back(std::move(t));
    }
    if (r.limits) {
        CsvTable d{"delta_limit", {"eps", "epsilon0", "gap", "above_threshold"}, {}};
        for (const auto& row : r.limits->delta.rows)
            d.rows.push_back({cell(row.eps), cell(row.epsilon0), cell(row.gap), cell(row.above_threshold)});
        out.push_back(std::move(d));
        CsvTable h{"hard_wall", {"V0", "epsilon0", "shifted", "dirichlet"}, {}};
        for (const auto& row : r.limits->hard_wall.rows)
            h.rows.push_back({cell(row.depth), cell(row.epsilon0), cell(row.shifted), cell(r.limits->hard_wall.dirichlet)});
        out.push_back(std::move(h));
    }
    if (!r.sweep.empty()) {
        CsvTable t{"sweep", sweep_header, {}};
        t.header.front() = to_string(r.config.sweep->axis);
        for (const auto& row : r.sweep)
            t.rows.push_back({cell(row.value), cell(row.epsilon0), cell(row.condition_integral), cell(row.excess),
                              cell(row.kappa_star), cell(row.energy_bs), cell(row.energy_fd), cell(row.fd_error)});
        out.push_back(std::move(t));
    }
    return out;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << content;
    out.close();
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

std::vector<std::filesystem::path> emit(const RunReport& report, const std::filesystem::path& directory,
                                        OutputFormat format) {
    std::error_code ec;
    std::filesystem::create_directories(directory, ec);
    if (ec || !std::filesystem::is_directory(directory))
        throw IoError("cannot create output directory " + directory.string());
    std::vector<std::filesystem::path> written;
    if (format != OutputFormat::csv) {
        const auto path = directory / (report.config.output.stem + ".json");
        write_file(path, to_json(report).dump(2) + "\n");
        written.push_back(path);
    }
    if (format != OutputFormat::json) {
        for (const auto& t : csv_tables(report)) {
            std::string text;
            for (std::size_t i = 0; i < t.header.size(); ++i) text += (i ? "," : "") + t.header[i];
            text += '\n';
            for (const auto& row : t.rows) {
                for (std::size_t i = 0; i < row.size(); ++i) text += (i ? "," : "") + quoted(row[i]);
                text += '\n';
            }
            const auto path = directory / (t.name + ".csv");
            write_file(path, text);
            written.push_back(path);
        }
    }
    return written;
}

}  // namespace softguide
