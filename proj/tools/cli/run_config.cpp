#include "run_config.hpp"

#include <fstream>
#include <set>

#include "wastetwin/error.hpp"

namespace wastetwin::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
}

// Included files are merged first, then the including file on top.
// Relative paths inside a file are made absolute against that file's
// directory before merging so they keep their meaning.
json read_with_includes(const fs::path& path, std::set<fs::path>& active) {
    const fs::path canon = fs::weakly_canonical(path);
    if (active.contains(canon)) throw ConfigError("config include cycle at " + path.string());
    active.insert(canon);

    json own = read_json(path);
    if (!own.is_object()) throw ConfigError("config " + path.string() + ": top level must be an object");
    const fs::path dir = canon.parent_path();
    auto absolutize = [&](json& node, const char* key) {
        if (node.is_object() && node.contains(key) && node.at(key).is_string()) {
            const fs::path p = node.at(key).get<std::string>();
            if (p.is_relative() && (p.has_parent_path() || p.extension() == ".json")) {
                node[key] = (dir / p).lexically_normal().string();
            }
        }
    };
    if (own.contains("digest")) absolutize(own["digest"], "scenario");
    if (own.contains("optimize")) absolutize(own["optimize"], "scenario");
    if (own.contains("pipeline")) absolutize(own["pipeline"], "digest_scenario");
    if (own.contains("scenario_dir") && own["scenario_dir"].is_string()) {
        const fs::path p = own["scenario_dir"].get<std::string>();
        if (p.is_relative()) own["scenario_dir"] = (dir / p).lexically_normal().string();
    }
    if (own.contains("output_dir") && own["output_dir"].is_string()) {
        const fs::path p = own["output_dir"].get<std::string>();
        if (p.is_relative()) own["output_dir"] = (dir / p).lexically_normal().string();
    }

    json merged = json::object();
    if (own.contains("include")) {
        const auto& inc = own.at("include");
        if (!inc.is_array()) throw ConfigError("config " + path.string() + ": include must be a list");
        for (const auto& item : inc) {
            const fs::path p = dir / item.get<std::string>();
            merged.merge_patch(read_with_includes(p, active));
        }
        own.erase("include");
    }
    merged.merge_patch(own);
    active.erase(canon);
    return merged;
}

const json& section(const json& root, const char* key) {
    static const json empty = json::object();
    if (!root.contains(key)) return empty;
    const auto& s = root.at(key);
    if (!s.is_object()) throw ConfigError(std::string("config: '") + key + "' must be an object");
    return s;
}

template <class F>
auto guarded(const char* what, F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw ConfigError(std::string(what) + ": " + e.what());
    }
}

pso::Interval interval_from_json(const json& j) {
    const auto pair = j.get<std::array<double, 2>>();
    return {pair[0], pair[1]};
}

digestor::ScenarioFile load_scenario(const fs::path& path) {
    if (!fs::exists(path)) throw ConfigError("scenario file not found: " + path.string());
    return digestor::load_scenario_file(path);
}

}  // namespace

fs::path resolve_scenario(const fs::path& scenario_dir, const std::string& name) {
    const fs::path p = name;
    if (p.has_parent_path() || p.extension() == ".json") return p;
    return scenario_dir / (name + ".json");
}

control::PidGains pid_from_json(const json& j, control::PidGains g) {
    guarded("pid", [&] {
        g.kp = j.value("kp", g.kp);
        g.ki = j.value("ki", g.ki);
        g.kd = j.value("kd", g.kd);
        g.output_min = j.value("output_min", g.output_min);
        g.output_max = j.value("output_max", g.output_max);
        g.integral_clamp = j.value("integral_clamp", g.integral_clamp);
        return 0;
    });
    g.validate();
    return g;
}

control::SafetyEnvelope safety_from_json(const json& j, control::SafetyEnvelope e) {
    guarded("safety", [&] {
        auto channel = [&](const char* key, control::ChannelLimits& lim) {
            if (!j.contains(key)) return;
            const auto& c = j.at(key);
            lim.min = c.value("min", lim.min);
            lim.max = c.value("max", lim.max);
            if (c.contains("action")) {
                lim.action = control::safety_action_from_string(c.at("action").get<std::string>());
            }
        };
        channel("temperature", e.temperature);
        channel("ph", e.ph);
        channel("pressure", e.pressure);
        e.heater_min = j.value("heater_min", e.heater_min);
        e.heater_max = j.value("heater_max", e.heater_max);
        return 0;
    });
    e.validate();
    return e;
}

digestor::SensorModel sensors_from_json(const json& j, std::uint64_t seed) {
    auto m = guarded("sensors", [&] {
        const std::string preset = j.value("preset", std::string("bench"));
        const double period = j.value("sample_period_min", 1.0);
        digestor::SensorModel s;
        if (preset == "bench") {
            s = digestor::SensorModel::bench(seed, period);
        } else if (preset == "noiseless") {
            s = digestor::SensorModel::noiseless(period);
            s.seed = seed;
        } else {
            throw ConfigError("sensors: unknown preset '" + preset + "'");
        }
        if (j.contains("channels")) {
            for (const auto& [name, c] : j.at("channels").items()) {
                const auto ch = telemetry::channel_from_string(name);
                if (!ch) throw ConfigError("sensors: unknown channel '" + name + "'");
                auto& n = s[*ch];
                n.sigma = c.value("sigma", n.sigma);
                n.bias = c.value("bias", n.bias);
                n.sample_period_min = c.value("sample_period_min", n.sample_period_min);
            }
        }
        return s;
    });
    m.validate();
    return m;
}

pso::PsoConfig pso_from_json(const json& j, pso::PsoConfig c) {
    return guarded("pso", [&] {
        c.swarm_size = j.value("swarm_size", c.swarm_size);
        c.inertia_weight = j.value("inertia_weight", c.inertia_weight);
        c.cognitive_coeff = j.value("cognitive_coeff", c.cognitive_coeff);
        c.social_coeff = j.value("social_coeff", c.social_coeff);
        c.max_iterations = j.value("max_iterations", c.max_iterations);
        c.velocity_clamp_fraction = j.value("velocity_clamp_fraction", c.velocity_clamp_fraction);
        c.tolerance = j.value("tolerance", c.tolerance);
        c.stall_iterations = j.value("stall_iterations", c.stall_iterations);
        // Bounds come from the setpoint box; validate the rest with a
        // placeholder dimension.
        pso::PsoConfig probe = c;
        probe.bounds = {{0.0, 1.0}};
        probe.validate();
        return c;
    });
}

control::AdaptationPolicy policy_from_json(const json& j, control::AdaptationPolicy p) {
    return guarded("optimize", [&] {
        p.refit_period_h = j.value("refit_period_h", p.refit_period_h);
        p.window_h = j.value("window_h", p.window_h);
        p.warmup_h = j.value("warmup_h", p.warmup_h);
        p.bootstrap_h = j.value("bootstrap_h", p.bootstrap_h);
        p.bootstrap_points = j.value("bootstrap_points", p.bootstrap_points);
        p.row_period_min = j.value("row_period_min", p.row_period_min);
        p.settle_min = j.value("settle_min", p.settle_min);
        p.control_dt_min = j.value("control_dt_min", p.control_dt_min);
        p.anchor_bootstrap = j.value("anchor_bootstrap", p.anchor_bootstrap);
        p.move_penalty = j.value("move_penalty", p.move_penalty);
        p.grid_points = j.value("grid_points", p.grid_points);
        p.evaluation_horizon_h = j.value("evaluation_horizon_h", p.evaluation_horizon_h);
        if (j.contains("objective")) {
            p.objective.kind = control::objective_kind_from_string(j.at("objective").get<std::string>());
        }
        p.objective.pressure_target_kpa = j.value("pressure_target_kpa", p.objective.pressure_target_kpa);
        if (j.contains("setpoint_bounds")) {
            const auto& b = j.at("setpoint_bounds");
            if (b.contains("temperature")) p.setpoint_bounds.temperature = interval_from_json(b.at("temperature"));
            if (b.contains("rpm")) p.setpoint_bounds.rpm = interval_from_json(b.at("rpm"));
        }
        if (j.contains("nominal")) {
            const auto& n = j.at("nominal");
            p.nominal.temperature = n.value("temperature", p.nominal.temperature);
            p.nominal.rpm = n.value("rpm", p.nominal.rpm);
        }
        return p;
    });
}

RunConfig load_run_config(const fs::path& path, const Overrides& ov) {
    if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
    std::set<fs::path> active;
    json root = read_with_includes(path, active);

    RunConfig rc;
    rc.source = path;
    rc.scenario_dir = guarded("scenario_dir", [&] {
        return fs::path(root.value("scenario_dir", (path.parent_path() / "../scenarios").string()));
    });
    rc.output_dir = ov.out ? *ov.out : fs::path(root.value("output_dir", std::string("out")));

    const auto& seeds = section(root, "seeds");
    guarded("seeds", [&] {
        for (const auto& [k, v] : seeds.items()) rc.seeds[k] = v.get<std::uint64_t>();
        return 0;
    });
    auto seed = [&](const char* k) { return rc.seeds.contains(k) ? rc.seeds.at(k) : 0ULL; };
    for (const char* k : {"sensors", "pso", "classifier", "stream"}) rc.seeds.try_emplace(k, 0);

    rc.pid = pid_from_json(section(root, "pid"));
    rc.safety = safety_from_json(section(root, "safety"));
    rc.sensors = sensors_from_json(section(root, "sensors"), seed("sensors"));
    rc.arm = kinematics::arm_from_json(section(root, "arm"));

    // digest
    {
        const auto& d = section(root, "digest");
        std::string name = guarded("digest", [&] { return d.value("scenario", std::string("lignocellulose")); });
        if (ov.scenario) name = *ov.scenario;
        rc.digest.scenario_path = resolve_scenario(rc.scenario_dir, name);
        rc.digest.scenario = load_scenario(rc.digest.scenario_path);
        guarded("digest", [&] {
            auto& b = rc.digest.batch;
            b.setpoint = d.value("setpoint_c", b.setpoint);
            b.rpm = d.value("rpm", b.rpm);
            b.duration_days = d.value("days", b.duration_days);
            b.record_dt_min = d.value("record_dt_min", b.record_dt_min);
            b.control_dt_min = d.value("control_dt_min", b.control_dt_min);
            rc.digest.initial_temperature = d.value("initial_temperature_c", b.setpoint);
            return 0;
        });
        if (ov.days) rc.digest.batch.duration_days = *ov.days;
        if (ov.scenario_fragment) {
            const fs::path& fp = *ov.scenario_fragment;
            if (!fs::exists(fp)) throw ConfigError("scenario fragment not found: " + fp.string());
            const json frag = read_json(fp);
            auto& s = rc.digest.scenario.scenario;
            guarded("scenario fragment", [&] {
                s.vs_loaded = frag.at("vs_loaded").get<double>();
                if (frag.contains("name")) s.name = s.name + "+" + frag.at("name").get<std::string>();
                return 0;
            });
            s.validate();
        }
        if (!(rc.digest.batch.duration_days > 0.0)) throw InputError("digest: --days must be > 0");
        if (!(rc.digest.batch.record_dt_min > 0.0) || !(rc.digest.batch.control_dt_min > 0.0)) {
            throw ConfigError("digest: time steps must be > 0");
        }
    }

    // optimize
    {
        const auto& o = section(root, "optimize");
        const std::string name =
            guarded("optimize", [&] { return o.value("scenario", std::string("food_waste_fed")); });
        rc.optimize.scenario_path = resolve_scenario(rc.scenario_dir, name);
        rc.optimize.scenario = load_scenario(rc.optimize.scenario_path);
        rc.optimize.policy = policy_from_json(o);
        guarded("optimize", [&] {
            rc.optimize.start_day = o.value("start_day", rc.optimize.start_day);
            rc.optimize.duration_days = o.value("days", rc.optimize.duration_days);
            return 0;
        });
        if (ov.objective) rc.optimize.policy.objective.kind = control::objective_kind_from_string(*ov.objective);
        if (ov.days) rc.optimize.duration_days = *ov.days;
        rc.optimize.policy.pso = pso_from_json(section(root, "pso"));
        rc.optimize.policy.seed = seed("pso");
        const auto& sg = section(root, "surrogate");
        if (sg.contains("feature_map")) {
            rc.optimize.policy.feature_map = guarded("surrogate", [&] {
                return surrogate::feature_map_from_string(sg.at("feature_map").get<std::string>());
            });
        }
        rc.optimize.policy.validate(rc.safety);
        if (!(rc.optimize.duration_days > 0.0)) throw InputError("optimize: --days must be > 0");
        if (!(rc.optimize.start_day >= 0.0)) throw ConfigError("optimize: start_day must be >= 0");
    }

    // sortline
    {
        const auto& c = section(root, "classifier");
        auto base = sorting::ClassifierModel::uniform_confusion(0.98);
        base.seed = seed("classifier");
        rc.sortline.classifier = sorting::classifier_from_json(c, base);
        rc.sortline.classifier.seed = seed("classifier");
        rc.sortline.threshold = guarded("classifier", [&] { return c.value("threshold", 0.5); });
        if (!(rc.sortline.threshold >= 0.0 && rc.sortline.threshold <= 1.0)) {
            throw ConfigError("classifier: threshold must lie in [0, 1]");
        }
        sorting::StreamConfig stream;
        stream.seed = seed("stream");
        rc.sortline.stream = sorting::stream_from_json(section(root, "stream"), stream);
        rc.sortline.stream.seed = seed("stream");
        if (ov.objects) {
            if (*ov.objects == 0) throw InputError("sortline: --objects must be > 0");
            rc.sortline.stream.objects = *ov.objects;
        }
        rc.sortline.layout = sorting::CellLayout::bench();
        if (root.contains("camera")) rc.sortline.layout.camera = sorting::homography_from_json(root.at("camera"));
        rc.sortline.layout.validate();
    }

    // pipeline
    {
        const auto& p = section(root, "pipeline");
        rc.pipeline_objects = guarded("pipeline", [&] { return p.value("objects", rc.pipeline_objects); });
        if (rc.pipeline_objects == 0) throw ConfigError("pipeline: objects must be > 0");
        const std::string name =
            guarded("pipeline", [&] { return p.value("digest_scenario", std::string("food_waste")); });
        rc.pipeline_digest = rc.digest;
        rc.pipeline_digest.scenario_path = resolve_scenario(rc.scenario_dir, name);
        rc.pipeline_digest.scenario = load_scenario(rc.pipeline_digest.scenario_path);
        if (p.contains("days")) rc.pipeline_digest.batch.duration_days = guarded("pipeline", [&] {
            return p.at("days").get<double>();
        });
        if (ov.days) rc.pipeline_digest.batch.duration_days = *ov.days;
    }

    // Resolved view for manifests. Paths are left out so the digest only
    // depends on content.
    rc.resolved = {
        {"pid", {{"kp", rc.pid.kp}, {"ki", rc.pid.ki}, {"kd", rc.pid.kd}, {"output_min", rc.pid.output_min},
                 {"output_max", rc.pid.output_max}, {"integral_clamp", rc.pid.integral_clamp}}},
        {"digest_scenario", digestor::to_json(rc.digest.scenario.scenario)},
        {"digest_plant", digestor::to_json(rc.digest.scenario.plant)},
        {"digest", {{"setpoint_c", rc.digest.batch.setpoint}, {"rpm", rc.digest.batch.rpm},
                    {"days", rc.digest.batch.duration_days}, {"record_dt_min", rc.digest.batch.record_dt_min},
                    {"control_dt_min", rc.digest.batch.control_dt_min},
                    {"initial_temperature_c", rc.digest.initial_temperature}}},
        {"optimize_scenario", digestor::to_json(rc.optimize.scenario.scenario)},
        {"optimize_plant", digestor::to_json(rc.optimize.scenario.plant)},
        {"optimize", root.value("optimize", json::object())},
        {"optimize_resolved", {{"start_day", rc.optimize.start_day}, {"days", rc.optimize.duration_days},
                               {"objective", control::to_string(rc.optimize.policy.objective.kind)}}},
        {"pso", root.value("pso", json::object())},
        {"surrogate", root.value("surrogate", json::object())},
        {"safety", root.value("safety", json::object())},
        {"sensors", root.value("sensors", json::object())},
        {"classifier", sorting::to_json(rc.sortline.classifier)},
        {"threshold", rc.sortline.threshold},
        {"stream", root.value("stream", json::object())},
        {"objects", rc.sortline.stream.objects},
        {"pipeline_objects", rc.pipeline_objects},
        {"pipeline_scenario", digestor::to_json(rc.pipeline_digest.scenario.scenario)},
        {"pipeline_days", rc.pipeline_digest.batch.duration_days},
        {"arm", kinematics::to_json(rc.arm)},
        {"camera", sorting::to_json(rc.sortline.layout.camera)},
        {"seeds", rc.seeds},
    };
    rc.resolved["optimize"].erase("scenario");
    return rc;
}

}  // namespace wastetwin::cli
