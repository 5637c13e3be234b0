#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "softguide/cli_runner.hpp"
#include "softguide/errors.hpp"

using namespace softguide;

namespace {

std::optional<int> env_threads() {
    const char* raw = std::getenv("SOFTGUIDE_THREADS");
    if (!raw || !*raw) return std::nullopt;
    try {
        std::size_t used = 0;
        const int n = std::stoi(raw, &used);
        if (used == std::string(raw).size() && n >= 1) return n;
    } catch (const std::exception&) {
    }
    std::cerr << "softguide: ignoring SOFTGUIDE_THREADS='" << raw << "'\n";
    return std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bound states of soft quantum waveguides"};
    app.require_subcommand(0, 1);
    app.fallthrough();

    std::string config_path;
    std::string out_dir;
    std::string format;
    int threads = 0;
    std::uint64_t seed = RunOptions{}.seed;
    app.add_option("--config", config_path, "scenario JSON")->required();
    app.add_option("--out", out_dir, "output directory (overrides output.directory)");
    app.add_option("--format", format, "json, csv or both (overrides output.format)")
        ->check(CLI::IsMember({"json", "csv", "both"}));
    app.add_option("--threads", threads, "worker threads (default SOFTGUIDE_THREADS, else 1)")
        ->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "seed for the randomized self-tests");

    const char* verbs[] = {"validate", "transverse", "straight-check", "exists", "bound-states",
                           "oracle",   "limits",     "sweep",          "all"};
    for (const char* v : verbs) app.add_subcommand(v, std::string("run ") + v);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    ScenarioConfig config;
    try {
        config = load_config(config_path);
    } catch (const std::exception& e) {
        std::cerr << "softguide: " << e.what() << "\n";
        return exit_code_for(e);
    }
    if (!out_dir.empty()) config.output.directory = out_dir;
    if (!format.empty()) config.output.format = *parse_format(format);

    RunOptions options;
    options.seed = seed;
    options.threads = threads > 0 ? threads : env_threads().value_or(1);

    std::vector<Analysis> requested = config.run;
    options.command = "config";
    if (const auto subs = app.get_subcommands(); !subs.empty()) {
        const std::string verb = subs.front()->get_name();
        options.command = verb;
        if (verb == "all") {
            requested = all_analyses();
        } else {
            requested = {*parse_analysis(verb)};
            if (requested.front() == Analysis::sweep && !config.sweep) {
                std::cerr << "softguide: sweep: the config has no sweep block\n";
                return 2;
            }
        }
    }

    int rc = 0;
    try {
        const auto report = run(config, requested, options);
        for (const auto& rec : report.records) {
            std::cout << to_string(rec.analysis) << ": " << to_string(rec.status);
            if (!rec.message.empty()) std::cout << " (" << rec.message << ")";
            std::cout << "\n";
        }
        rc = report.exit_code();
        for (const auto& path : emit(report, config.output.directory, config.output.format))
            std::cout << "wrote " << path.string() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "softguide: " << e.what() << "\n";
        return exit_code_for(e);
    }
    return rc;
}
