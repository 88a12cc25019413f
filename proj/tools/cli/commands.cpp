#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "wastetwin/error.hpp"
#include "wastetwin/util.hpp"

#ifndef WASTETWIN_VERSION
#define WASTETWIN_VERSION "0.0.0"
#endif

namespace wastetwin::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_file(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed: " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

void write_manifest(const fs::path& dir, const std::string& run_id, const RunConfig& rc,
                    const json& stage_config, double start_min, double end_min) {
    telemetry::RunManifest m;
    m.run_id = run_id;
    m.seeds = rc.seeds;
    m.config_digest = telemetry::config_digest(stage_config);
    m.start_min = start_min;
    m.end_min = end_min;
    m.artifact_version = WASTETWIN_VERSION;
    write_json(dir / "manifest.json", telemetry::to_json(m));
}

std::size_t argmax(const std::vector<double>& v) {
    return static_cast<std::size_t>(std::distance(v.begin(), std::max_element(v.begin(), v.end())));
}

StageResult digest_stage(const RunConfig& rc, const DigestSettings& ds, const fs::path& dir,
                         const json& stage_config) {
    const auto& sc = ds.scenario;
    const auto initial = digestor::initial_state(sc.scenario, sc.plant, ds.initial_temperature);
    const auto run = control::run_pid_batch(sc.scenario, sc.plant, initial, rc.pid, ds.batch, rc.sensors, "digest");

    const auto daily = run.daily_gas();
    std::ostringstream csv;
    csv << "day,gas_L\n";
    double total = 0.0;
    for (std::size_t d = 0; d < daily.size(); ++d) {
        csv << d + 1 << ',' << format_double(daily[d]) << '\n';
        total += daily[d];
    }

    std::ostringstream tel;
    telemetry::write_csv(tel, run.telemetry.records());
    write_file(dir / "telemetry.csv", tel.str());
    write_file(dir / "daily_yield.csv", csv.str());

    const auto& fin = run.final_state();
    json summary = {
        {"scenario", sc.scenario.name},
        {"vs_loaded", sc.scenario.vs_loaded},
        {"days", ds.batch.duration_days},
        {"total_gas_L", total},
        {"peak_day", daily.empty() ? json(nullptr) : json(argmax(daily) + 1)},
        {"daily_gas_L", daily},
        {"final_state",
         {{"temperature", fin.temperature}, {"ph", fin.ph}, {"pressure", fin.pressure},
          {"gas_cumulative", fin.gas_cumulative}}},
    };
    write_json(dir / "summary.json", summary);
    write_manifest(dir, "digest", rc, stage_config, 0.0, ds.batch.duration_days * 1440.0);
    return {kExitOk, summary};
}

json digest_config(const RunConfig& rc, const DigestSettings& ds) {
    json j = rc.resolved;
    j["stage"] = "digest";
    j["digest_scenario"] = digestor::to_json(ds.scenario.scenario);
    j["digest_plant"] = digestor::to_json(ds.scenario.plant);
    j["digest"]["days"] = ds.batch.duration_days;
    return j;
}

}  // namespace

StageResult run_digest(const RunConfig& rc, const fs::path& out) {
    return digest_stage(rc, rc.digest, out / "digest", digest_config(rc, rc.digest));
}

StageResult run_optimize(const RunConfig& rc, const fs::path& out) {
    const fs::path dir = out / "optimize";
    const auto& os = rc.optimize;

    control::CampaignInputs in;
    in.scenario = os.scenario.scenario;
    in.plant = os.scenario.plant;
    in.initial = digestor::initial_state(in.scenario, in.plant, os.policy.nominal.temperature);
    in.initial.t = os.start_day;
    in.sensors = rc.sensors;
    in.policy = os.policy;
    in.gains = rc.pid;
    in.envelope = rc.safety;
    in.duration_days = os.duration_days;
    const auto report = control::run_adaptive_campaign(in);

    write_json(dir / "campaign.json", control::to_json(report));

    json traces = json::array();
    for (const auto& c : report.cycles) {
        if (!c.pso) continue;
        char name[64];
        std::snprintf(name, sizeof(name), "pso_trace_cycle_%03zu.csv", c.index);
        std::ostringstream csv;
        pso::write_trace_csv(csv, c.pso->convergence_trace);
        write_file(dir / name, csv.str());
        std::vector<double> values;
        for (const auto& p : c.pso->convergence_trace) values.push_back(p.best_value);
        traces.push_back({{"cycle", c.index}, {"file", name},
                          {"stabilization_ratio", values.size() >= 5 ? json(control::stabilization_ratio(values))
                                                                   : json(nullptr)}});
    }

    std::ostringstream pcsv;
    pcsv << "t_min,pressure_kpa\n";
    std::vector<double> pressures;
    for (const auto& [t, p] : report.pressure_trace()) {
        pcsv << format_double(t) << ',' << format_double(p) << '\n';
        pressures.push_back(p);
    }
    write_file(dir / "pressure_trace.csv", pcsv.str());

    std::ostringstream scsv;
    control::write_safety_csv(scsv, report.safety_events);
    write_file(dir / "safety_events.csv", scsv.str());

    std::ostringstream tel;
    telemetry::write_csv(tel, report.telemetry.records());
    write_file(dir / "telemetry.csv", tel.str());

    std::size_t degraded = 0;
    for (const auto& c : report.cycles) degraded += c.degraded ? 1 : 0;
    json summary = {
        {"objective", control::to_string(report.objective.kind)},
        {"cycles", report.cycles.size()},
        {"degraded_cycles", degraded},
        {"final_holdout_r2", report.final_holdout_r2 ? json(*report.final_holdout_r2) : json(nullptr)},
        {"pressure_stabilization_ratio",
         pressures.size() >= 5 ? json(control::stabilization_ratio(pressures)) : json(nullptr)},
        {"pso_traces", traces},
        {"safety_events", report.safety_events.size()},
        {"final_pressure_kpa", report.final_state.pressure},
    };
    json cfg = rc.resolved;
    cfg["stage"] = "optimize";
    const double t0 = os.start_day * 1440.0;
    write_manifest(dir, "optimize", rc, cfg, t0, t0 + os.duration_days * 1440.0);
    return {kExitOk, summary};
}

namespace {

StageResult sortline_stage(const RunConfig& rc, std::size_t objects, const fs::path& dir,
                           json* fragment = nullptr) {
    auto stream = rc.sortline.stream;
    stream.objects = objects;
    const auto report = sorting::run_sortline(stream, rc.sortline.classifier, rc.sortline.threshold,
                                              rc.sortline.layout, rc.arm);
    const json rep = sorting::to_json(report);
    write_json(dir / "sort_report.json", rep);
    const json frag = sorting::biodegradable_fragment(report);
    write_json(dir / "biodegradable_fragment.json", frag);
    if (fragment) *fragment = frag;
    json cfg = rc.resolved;
    cfg["stage"] = "sortline";
    cfg["objects"] = objects;
    write_manifest(dir, "sortline", rc, cfg, 0.0, report.duration_s / 60.0);
    return {kExitOk, rep};
}

}  // namespace

StageResult run_sortline(const RunConfig& rc, const fs::path& out) {
    return sortline_stage(rc, rc.sortline.stream.objects, out / "sortline");
}

StageResult run_pipeline(const RunConfig& rc, const fs::path& out) {
    json summary = json::object();

    json frag;
    const auto sort = sortline_stage(rc, rc.pipeline_objects, out / "sortline", &frag);
    summary["sortline"] = sort.summary;

    DigestSettings ds = rc.pipeline_digest;
    ds.scenario.scenario.vs_loaded = frag.at("vs_loaded").get<double>();
    ds.scenario.scenario.name += "+sortline_output";
    ds.scenario.scenario.validate();
    const auto dig = digest_stage(rc, ds, out / "digest", digest_config(rc, ds));
    summary["digest"] = dig.summary;

    const auto opt = run_optimize(rc, out);
    summary["optimize"] = opt.summary;

    write_json(out / "pipeline_summary.json", summary);
    return {kExitOk, summary};
}

int execute(Command command, const fs::path& config_path, const Overrides& overrides, std::ostream& err) {
    RunConfig rc;
    try {
        rc = load_run_config(config_path, overrides);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const InputError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const Error& e) {
        err << "config error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        switch (command) {
            case Command::digest: return run_digest(rc, rc.output_dir).status;
            case Command::optimize: return run_optimize(rc, rc.output_dir).status;
            case Command::sortline: return run_sortline(rc, rc.output_dir).status;
            case Command::pipeline: return run_pipeline(rc, rc.output_dir).status;
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitRuntime;
}

}  // namespace wastetwin::cli
