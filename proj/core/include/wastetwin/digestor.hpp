#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "wastetwin/telemetry.hpp"

namespace wastetwin::digestor {

/// Modified-Gompertz parameters of one substrate fraction.
struct KineticFraction {
    double b0 = 0.0;   // ultimate yield, L/gVS
    double rm = 0.0;   // peak rate, L/gVS/day
    double lag = 0.0;  // lag, days
};

enum class Fraction { fast, slow };

struct SubstrateScenario {
    std::string name;
    KineticFraction fast;
    KineticFraction slow;
    double vs_loaded = 0.0;  // g VS
    double t_opt = 37.0;     // degC
    double ph_opt = 7.0;
    // Semi-continuous feeding: feed_vs_per_day * feed_interval arrives every
    // feed_interval, starting one interval after t = 0. Zero means batch.
    double feed_vs_per_day = 0.0;
    double feed_interval_h = 6.0;

    const KineticFraction& fraction(Fraction f) const { return f == Fraction::fast ? fast : slow; }
    /// VS added up to and including time t (days).
    double loaded_vs(double t_days) const;
    /// Upper bound on total gas produced by time t, litres.
    double ultimate_gas(double t_days = 0.0) const { return loaded_vs(t_days) * (fast.b0 + slow.b0); }
    /// Uninhibited gas produced in [t0, t1], litres, summed over every load.
    double potential_gas(double t0_days, double t1_days) const;
    /// Uninhibited production rate at t, L/day.
    double potential_rate(double t_days) const;
    void validate() const;
};

/// Vessel, thermal, pH and gas-line constants of the bench digester.
struct PlantParams {
    double vessel_volume_l = 5.0;
    double headspace_fraction = 0.3;
    double vent_threshold_kpa = 15.0;
    double atmospheric_kpa = 101.325;

    double ambient_c = 22.0;
    double heat_capacity_j_per_c = 14650.0;  // ~3.5 kg of slurry
    double loss_w_per_c = 3.0;
    double heater_efficiency = 0.85;
    double stir_efficiency_gain = 0.10;  // added to efficiency at rpm >= stir_reference_rpm
    double stir_reference_rpm = 200.0;

    double sigma_t = 6.0;    // degC, width of the temperature factor
    double sigma_ph = 0.8;   // width of the pH factor
    double ph_floor = 5.5;   // acidification floor
    double acidification_gain = 0.7;  // per (L/gVS/day) per day
    double ph_recovery_days = 2.0;

    double outlet_conductance = 0.4;  // L/day/kPa through the gas meter
    double vent_conductance = 20.0;   // L/day/kPa with the vent open

    double headspace_l() const { return vessel_volume_l * headspace_fraction; }
    double working_level() const { return 1.0 - headspace_fraction; }
    void validate() const;
};

struct DigestorState {
    double t = 0.0;             // days
    double temperature = 22.0;  // degC
    double ph = 7.0;
    double pressure = 0.0;        // kPa gauge
    double gas_cumulative = 0.0;  // L
    double gas_rate = 0.0;        // L/day
    double heater_power = 0.0;    // W
    double stirrer_rpm = 0.0;
    double level = 0.7;

    void validate(const PlantParams& params) const;
};

DigestorState initial_state(const SubstrateScenario& scenario, const PlantParams& params,
                            double temperature);

struct Actuators {
    double heater_power = 0.0;  // W
    double stirrer_rpm = 0.0;
    bool vent_open = false;
    // Alkaline dosing holds pH at the scenario optimum.
    bool ph_dosing = false;

    friend bool operator==(const Actuators&, const Actuators&) = default;
};

struct ChannelNoise {
    double sigma = 0.0;
    double bias = 0.0;
    double sample_period_min = 1.0;
};

struct SensorModel {
    std::array<ChannelNoise, telemetry::kAllChannels.size()> channels{};
    std::uint64_t seed = 0;

    ChannelNoise& operator[](telemetry::Channel c) { return channels[static_cast<std::size_t>(c)]; }
    const ChannelNoise& operator[](telemetry::Channel c) const {
        return channels[static_cast<std::size_t>(c)];
    }
    void validate() const;

    static SensorModel noiseless(double sample_period_min = 1.0);
    /// Bench-sensor noise levels used by the shipped configs.
    static SensorModel bench(std::uint64_t seed, double sample_period_min = 1.0);
};

/// Stateful sampler: owns the noise RNG and per-channel sample clocks.
class SensorArray {
public:
    explicit SensorArray(SensorModel model);

    /// Readings for every channel whose sample is due at `state.t`.
    std::vector<telemetry::TelemetryRecord> sample(const DigestorState& state);
    const SensorModel& model() const { return model_; }

private:
    SensorModel model_;
    std::mt19937_64 rng_;
    std::array<double, telemetry::kAllChannels.size()> last_sample_min_;
};

/// Cumulative modified-Gompertz yield, L/gVS. Zero when b0 == 0.
double gompertz_cumulative(const SubstrateScenario& scenario, Fraction fraction, double t_days);
double gompertz_cumulative(const KineticFraction& k, double t_days);
/// d/dt of gompertz_cumulative, L/gVS/day.
double gompertz_rate(const KineticFraction& k, double t_days);

/// Peak-normalized inhibition factors in [0, 1].
double temperature_factor(double temperature, double t_opt, double sigma_t);
double ph_factor(double ph, double ph_opt, double sigma_ph);

struct StepResult {
    DigestorState state;
    std::vector<telemetry::TelemetryRecord> telemetry;
};

/// Advances the plant by `dt_min` minutes with the explicit midpoint rule
/// for temperature and pH, the exact Gompertz increment (scaled by midpoint
/// inhibition) for gas, and the exact exponential solution of the linear
/// headspace balance over the step. Pressure is capped at the vent threshold.
StepResult step_plant(const DigestorState& state, const SubstrateScenario& scenario,
                      const PlantParams& params, const Actuators& actuators, double dt_min,
                      SensorArray& sensors);

/// Decides actuators from the current true state and the most recent
/// sensor readings (closed loop) or ignores both (open loop).
using ActuatorSchedule =
    std::function<Actuators(const DigestorState&, std::span<const telemetry::TelemetryRecord>)>;

ActuatorSchedule constant_schedule(Actuators actuators);

struct ScenarioRun {
    std::vector<DigestorState> trajectory;  // initial state then one per step
    telemetry::TelemetryStore telemetry;
    double dt_min = 15.0;

    /// Gas produced in each whole day [d-1, d), litres.
    std::vector<double> daily_gas() const;
    const DigestorState& final_state() const { return trajectory.back(); }
};

ScenarioRun run_scenario(const SubstrateScenario& scenario, const PlantParams& params,
                         const DigestorState& initial, const ActuatorSchedule& schedule,
                         double duration_days, double dt_min, const SensorModel& sensors,
                         std::string run_id = "digest");

SubstrateScenario scenario_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SubstrateScenario& s);
PlantParams plant_params_from_json(const nlohmann::json& j, PlantParams base = {});
nlohmann::json to_json(const PlantParams& p);

struct ScenarioFile {
    SubstrateScenario scenario;
    PlantParams plant;
};

/// Reads a scenario JSON file; the optional "plant" object overrides PlantParams.
ScenarioFile load_scenario_file(const std::filesystem::path& path);

}  // namespace wastetwin::digestor
