#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

namespace cli = wastetwin::cli;

int main(int argc, char** argv) {
    CLI::App app{"wastetwin: smart-waste digital twin (sorting cell + anaerobic digester)"};
    app.require_subcommand(1);

    std::string config = "data/config/default.json";
    cli::Overrides ov;
    std::string out, scenario, fragment, objective;
    double days = 0.0;
    std::size_t objects = 0;

    app.add_option("-c,--config", config, "Run config file")->capture_default_str();
    app.add_option("-o,--out", out, "Output directory (overrides output_dir)");

    auto* digest = app.add_subcommand("digest", "PID-only batch digestion; telemetry and daily yield");
    auto* days_d = digest->add_option("--days", days, "Simulated days");
    auto* scen = digest->add_option("--scenario", scenario, "Scenario name or JSON path");
    auto* frag = digest->add_option("--scenario-fragment", fragment, "Sortline output overriding vs_loaded");

    auto* optimize = app.add_subcommand("optimize", "Adaptive surrogate + PSO campaign");
    auto* days_o = optimize->add_option("--days", days, "Campaign length in days");
    auto* obj = optimize->add_option("--objective", objective,
                                     "track_pressure or maximize_gas_rate");

    auto* sortline = app.add_subcommand("sortline", "Robotic sorting cell");
    auto* objs = sortline->add_option("--objects", objects, "Objects in the stream");

    auto* pipeline = app.add_subcommand("pipeline", "sortline -> digest -> optimize");
    auto* days_p = pipeline->add_option("--days", days, "Days for the digest and campaign stages");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? cli::kExitOk : cli::kExitUsage;
    }

    if (!out.empty()) ov.out = out;
    if (*days_d || *days_o || *days_p) {
        if (!(days > 0.0)) {
            std::cerr << "usage error: --days must be > 0\n";
            return cli::kExitUsage;
        }
        ov.days = days;
    }
    if (*scen) ov.scenario = scenario;
    if (*frag) ov.scenario_fragment = fragment;
    if (*obj) ov.objective = objective;
    if (*objs) {
        if (objects == 0) {
            std::cerr << "usage error: --objects must be > 0\n";
            return cli::kExitUsage;
        }
        ov.objects = objects;
    }

    cli::Command command = cli::Command::pipeline;
    if (*digest) command = cli::Command::digest;
    else if (*optimize) command = cli::Command::optimize;
    else if (*sortline) command = cli::Command::sortline;
    return cli::execute(command, config, ov, std::cerr);
}
