#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "wastetwin/classifier.hpp"
#include "wastetwin/control.hpp"
#include "wastetwin/digestor.hpp"
#include "wastetwin/kinematics.hpp"
#include "wastetwin/sortline.hpp"

namespace wastetwin::cli {

struct DigestSettings {
    digestor::ScenarioFile scenario;
    std::filesystem::path scenario_path;
    control::BatchSetup batch;
    double initial_temperature = 22.0;
};

struct OptimizeSettings {
    digestor::ScenarioFile scenario;
    std::filesystem::path scenario_path;
    // Campaign clock start inside the feeding history, days.
    double start_day = 0.0;
    double duration_days = 6.0;
    control::AdaptationPolicy policy;
};

struct SortSettings {
    sorting::StreamConfig stream;
    sorting::ClassifierModel classifier;
    double threshold = 0.5;
    sorting::CellLayout layout;
};

/// Fully resolved and validated run configuration.
struct RunConfig {
    std::filesystem::path source;
    std::filesystem::path scenario_dir;
    std::filesystem::path output_dir;

    control::PidGains pid;
    control::SafetyEnvelope safety;
    digestor::SensorModel sensors;
    kinematics::ArmModel arm;

    DigestSettings digest;
    OptimizeSettings optimize;
    SortSettings sortline;
    // Objects sorted by the pipeline's first stage and the scenario whose
    // kinetics digest its biodegradable output.
    std::size_t pipeline_objects = 100;
    DigestSettings pipeline_digest;

    std::map<std::string, std::uint64_t> seeds;
    // Canonical resolved config, hashed into run manifests.
    nlohmann::json resolved;
};

/// Scalar overrides taken from command-line flags.
struct Overrides {
    std::optional<std::filesystem::path> out;
    std::optional<double> days;
    std::optional<std::string> scenario;
    std::optional<std::filesystem::path> scenario_fragment;
    std::optional<std::string> objective;
    std::optional<std::size_t> objects;
};

/// Reads the config file (following "include" lists; the including file
/// wins on conflicts), applies overrides and validates everything,
/// including referenced scenario files. Throws ConfigError or InputError.
RunConfig load_run_config(const std::filesystem::path& path, const Overrides& overrides = {});

/// A scenario name resolves to <scenario_dir>/<name>.json; anything with a
/// path separator or a .json suffix is taken as a path.
std::filesystem::path resolve_scenario(const std::filesystem::path& scenario_dir, const std::string& name);

control::PidGains pid_from_json(const nlohmann::json& j, control::PidGains base = {});
control::SafetyEnvelope safety_from_json(const nlohmann::json& j, control::SafetyEnvelope base = {});
digestor::SensorModel sensors_from_json(const nlohmann::json& j, std::uint64_t seed);
pso::PsoConfig pso_from_json(const nlohmann::json& j, pso::PsoConfig base = {});
control::AdaptationPolicy policy_from_json(const nlohmann::json& j, control::AdaptationPolicy base = {});

}  // namespace wastetwin::cli
