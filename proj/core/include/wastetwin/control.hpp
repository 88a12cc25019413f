#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wastetwin/digestor.hpp"
#include "wastetwin/pso.hpp"
#include "wastetwin/surrogate.hpp"
#include "wastetwin/telemetry.hpp"

namespace wastetwin::control {

// ---------------------------------------------------------------------------
// PID heater loop

/// Heater PID gains. Units: kp W/degC, ki W/(degC*min), kd W*min/degC.
struct PidGains {
    double kp = 160.0;
    double ki = 40.0;
    double kd = 160.0;
    double output_min = 0.0;    // W
    double output_max = 200.0;  // W
    double integral_clamp = 150.0;  // W

    void validate() const;
};

struct PidState {
    double integral = 0.0;  // integral term, W
    std::optional<double> previous_measurement;
    bool saturated = false;
};

struct PidOutput {
    double heater_power = 0.0;
    PidState state;
};

/// Positional PID with derivative on measurement. Integration is frozen
/// whenever the output would saturate and the integral term is clamped to
/// +/- integral_clamp. Throws SensorFaultError on a non-finite measurement.
PidOutput pid_step(const PidGains& gains, double setpoint, double measurement, double dt_min,
                   const PidState& state);

/// Heater integral that holds `temperature` steady with the heater alone;
/// used for a bumpless start at the setpoint.
double holding_integral(const digestor::PlantParams& plant, double temperature, double rpm,
                        const PidGains& gains);

struct BatchSetup {
    double setpoint = 37.0;  // degC
    double rpm = 100.0;
    double duration_days = 17.0;
    double record_dt_min = 15.0;   // trajectory spacing
    double control_dt_min = 1.0;   // heater loop period; must divide record_dt_min
};

/// Batch digestion under PID temperature control only. The heater loop
/// runs every control_dt_min on the temperature reading; the returned
/// trajectory is spaced record_dt_min apart.
digestor::ScenarioRun run_pid_batch(const digestor::SubstrateScenario& scenario,
                                    const digestor::PlantParams& plant,
                                    const digestor::DigestorState& initial, const PidGains& gains,
                                    const BatchSetup& setup, const digestor::SensorModel& sensors,
                                    std::string run_id = "digest");

// ---------------------------------------------------------------------------
// Safety

enum class SafetyAction { clamp_actuators, emergency_vent, halt };

std::string to_string(SafetyAction a);
SafetyAction safety_action_from_string(const std::string& name);

struct ChannelLimits {
    double min = 0.0;
    double max = 0.0;
    SafetyAction action = SafetyAction::clamp_actuators;
};

struct SafetyEnvelope {
    ChannelLimits temperature{15.0, 45.0, SafetyAction::clamp_actuators};
    ChannelLimits ph{5.0, 9.0, SafetyAction::clamp_actuators};
    ChannelLimits pressure{-1.0, 14.0, SafetyAction::emergency_vent};
    // Heater range used when an action forces the heater.
    double heater_min = 0.0;
    double heater_max = 200.0;

    void validate() const;
};

struct SafetyEvent {
    double t_min = 0.0;
    std::string channel;
    SafetyAction action = SafetyAction::clamp_actuators;
    double value = 0.0;
};

struct SafetyOutcome {
    digestor::Actuators actuators;
    std::vector<SafetyEvent> events;
    bool halted = false;
};

/// Passes actuators through unchanged unless a channel leaves its envelope,
/// in which case the channel's action is applied and an event emitted.
SafetyOutcome enforce_safety(const digestor::DigestorState& state, const SafetyEnvelope& envelope,
                             digestor::Actuators actuators);

void write_safety_csv(std::ostream& out, const std::vector<SafetyEvent>& events);

// ---------------------------------------------------------------------------
// Adaptive campaign

enum class ObjectiveKind { maximize_gas_rate, track_pressure_target };

struct ObjectiveSpec {
    ObjectiveKind kind = ObjectiveKind::track_pressure_target;
    double pressure_target_kpa = 4.0;
};

std::string to_string(ObjectiveKind k);
ObjectiveKind objective_kind_from_string(const std::string& name);

struct Setpoint {
    double temperature = 37.0;  // degC
    double rpm = 100.0;

    friend bool operator==(const Setpoint&, const Setpoint&) = default;
};

struct SetpointBounds {
    pso::Interval temperature{32.0, 40.0};
    pso::Interval rpm{40.0, 160.0};
};

struct AdaptationPolicy {
    double refit_period_h = 6.0;
    double window_h = 24.0;
    // PID-only operation at `nominal` before adaptation starts.
    double warmup_h = 24.0;
    // Latin-hypercube exploration after warm-up.
    double bootstrap_h = 48.0;
    std::size_t bootstrap_points = 16;
    // Dataset rows are means over row_period; rows starting within settle of
    // a setpoint change are dropped.
    double row_period_min = 30.0;
    double settle_min = 90.0;
    double control_dt_min = 1.0;
    // Keep the bootstrap rows in every dataset alongside the trailing window.
    bool anchor_bootstrap = true;

    surrogate::FeatureMap feature_map = surrogate::FeatureMap::quadratic_with_interactions;
    pso::PsoConfig pso;  // bounds are filled from setpoint_bounds
    SetpointBounds setpoint_bounds;
    Setpoint nominal;
    ObjectiveSpec objective;
    // Added to the surrogate objective per unit of squared setpoint move,
    // measured in box widths; breaks ties between equally good setpoints.
    double move_penalty = 1e-3;

    // Held-out check of the last surrogate.
    std::size_t grid_points = 5;
    double evaluation_horizon_h = 6.0;

    std::uint64_t seed = 0;

    void validate(const SafetyEnvelope& envelope) const;
};

struct CycleRecord {
    std::size_t index = 0;
    double t_h = 0.0;
    bool degraded = false;
    std::string message;
    std::size_t rows = 0;
    std::optional<double> train_r2;
    Setpoint chosen;
    Setpoint applied;
    double predicted = 0.0;  // surrogate prediction at the applied setpoint
    std::optional<pso::OptimizationResult> pso;
    std::optional<surrogate::RegressionModel> model;
};

struct HoldoutPoint {
    Setpoint setpoint;
    double ph = 0.0;
    double observed = 0.0;
    double predicted = 0.0;
};

struct CampaignEvent {
    double t_min = 0.0;
    std::string kind;
    std::string detail;
};

struct CampaignReport {
    ObjectiveSpec objective;
    std::vector<CycleRecord> cycles;
    std::optional<double> final_holdout_r2;
    std::vector<HoldoutPoint> holdout;
    std::vector<SafetyEvent> safety_events;
    std::vector<CampaignEvent> events;
    std::vector<std::pair<double, Setpoint>> setpoint_log;  // (t_min, setpoint) at each change
    telemetry::TelemetryStore telemetry;
    digestor::DigestorState final_state;

    /// Measured pressure samples as (t_min, kPa).
    std::vector<std::pair<double, double>> pressure_trace() const;
};

/// Test hook: return true to force the surrogate fit of cycle `index` to fail.
using FitFailureInjector = std::function<bool(std::size_t index)>;

struct CampaignInputs {
    digestor::SubstrateScenario scenario;
    digestor::PlantParams plant;
    digestor::DigestorState initial;
    digestor::SensorModel sensors;
    AdaptationPolicy policy;
    PidGains gains;
    SafetyEnvelope envelope;
    double duration_days = 6.0;
    FitFailureInjector inject_fit_failure;
};

/// Sense -> decide -> act loop. Every refit period after warm-up and
/// bootstrap: build a dataset from the trailing telemetry window, fit the
/// surrogate, minimize the surrogate objective with PSO over the setpoint
/// box and apply the result through the safety filter. A failed fit keeps
/// the previous setpoints and logs a degraded cycle.
CampaignReport run_adaptive_campaign(const CampaignInputs& inputs);

/// std(last 20% of values) / (max - min of all values); the trace is
/// considered stable when this is below 0.1.
double stabilization_ratio(const std::vector<double>& values);

nlohmann::json to_json(const CampaignReport& report);

}  // namespace wastetwin::control
