#pragma once

#include <filesystem>
#include <iosfwd>

#include <json.hpp>

#include "run_config.hpp"

namespace wastetwin::cli {

// Stable exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

struct StageResult {
    int status = kExitOk;
    nlohmann::json summary;
};

/// PID-only batch digestion. Writes <out>/digest/{telemetry.csv,
/// daily_yield.csv, summary.json, manifest.json}.
StageResult run_digest(const RunConfig& config, const std::filesystem::path& out);

/// Adaptive campaign. Writes <out>/optimize/{campaign.json,
/// pressure_trace.csv, safety_events.csv, telemetry.csv, manifest.json} and
/// one pso_trace_cycle_NNN.csv per successful cycle.
StageResult run_optimize(const RunConfig& config, const std::filesystem::path& out);

/// Sorting cell. Writes <out>/sortline/{sort_report.json,
/// biodegradable_fragment.json, manifest.json}.
StageResult run_sortline(const RunConfig& config, const std::filesystem::path& out);

/// Sortline, then digestion of its biodegradable output, then the campaign.
/// Writes every stage under <out> plus <out>/pipeline_summary.json.
StageResult run_pipeline(const RunConfig& config, const std::filesystem::path& out);

enum class Command { digest, optimize, sortline, pipeline };

/// Loads and validates the config, then runs the command. Errors are
/// reported on `err` and mapped to exit codes: configuration and usage
/// problems to 2 (before any file is written), runtime failures to 1.
int execute(Command command, const std::filesystem::path& config_path, const Overrides& overrides,
            std::ostream& err);

}  // namespace wastetwin::cli
