#include "wastetwin/digestor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "wastetwin/error.hpp"
#include "wastetwin/util.hpp"

namespace wastetwin::digestor {

using telemetry::Channel;
using telemetry::TelemetryRecord;

namespace {

constexpr double kMinutesPerDay = 1440.0;
constexpr double kSecondsPerMinute = 60.0;

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
}

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

double true_value(const DigestorState& s, Channel c) {
    switch (c) {
        case Channel::temperature: return s.temperature;
        case Channel::ph: return s.ph;
        case Channel::pressure: return s.pressure;
        case Channel::gas_rate: return s.gas_rate;
        case Channel::gas_cumulative: return s.gas_cumulative;
        case Channel::level: return s.level;
        case Channel::rpm: return s.stirrer_rpm;
        case Channel::heater_power: return s.heater_power;
    }
    return 0.0;
}

}  // namespace

void SubstrateScenario::validate() const {
    for (auto [label, k] : {std::pair{"fast", fast}, std::pair{"slow", slow}}) {
        require(finite_nonneg(k.b0) && finite_nonneg(k.rm) && finite_nonneg(k.lag),
                "scenario '" + name + "': " + label + " yields, rates and lags must be >= 0");
        require(k.b0 == 0.0 || k.rm > 0.0,
                "scenario '" + name + "': " + label + " fraction has b0 > 0 but rm == 0");
    }
    require(finite_nonneg(vs_loaded), "scenario '" + name + "': vs_loaded must be >= 0");
    require(finite_nonneg(feed_vs_per_day), "scenario '" + name + "': feed_vs_per_day must be >= 0");
    require(feed_interval_h > 0.0 && std::isfinite(feed_interval_h),
            "scenario '" + name + "': feed_interval_h must be > 0");
    require(ph_opt > 0.0 && ph_opt < 14.0, "scenario '" + name + "': ph_opt must lie in (0, 14)");
    require(t_opt > 0.0 && t_opt < 100.0, "scenario '" + name + "': t_opt must lie in (0, 100)");
}

void PlantParams::validate() const {
    require(vessel_volume_l > 0.0, "plant: vessel_volume_l must be > 0");
    require(headspace_fraction > 0.0 && headspace_fraction < 1.0,
            "plant: headspace_fraction must lie in (0, 1)");
    require(vent_threshold_kpa > 0.0, "plant: vent_threshold_kpa must be > 0");
    require(atmospheric_kpa > 0.0, "plant: atmospheric_kpa must be > 0");
    require(heat_capacity_j_per_c > 0.0 && loss_w_per_c > 0.0,
            "plant: heat capacity and loss coefficient must be > 0");
    require(heater_efficiency > 0.0 && heater_efficiency + stir_efficiency_gain <= 1.0 &&
                stir_efficiency_gain >= 0.0,
            "plant: heater efficiency (plus stirring gain) must lie in (0, 1]");
    require(stir_reference_rpm > 0.0, "plant: stir_reference_rpm must be > 0");
    require(sigma_t > 0.0 && sigma_ph > 0.0, "plant: inhibition widths must be > 0");
    require(ph_floor > 0.0 && ph_floor < 14.0, "plant: ph_floor must lie in (0, 14)");
    require(acidification_gain >= 0.0 && ph_recovery_days > 0.0,
            "plant: acidification_gain >= 0 and ph_recovery_days > 0 required");
    require(outlet_conductance >= 0.0 && vent_conductance >= 0.0,
            "plant: gas-line conductances must be >= 0");
}

void DigestorState::validate(const PlantParams& params) const {
    auto bad = [](const std::string& what) { throw StateError("digestor state: " + what); };
    if (!std::isfinite(t) || !std::isfinite(temperature) || !std::isfinite(ph) ||
        !std::isfinite(pressure) || !std::isfinite(gas_cumulative) || !std::isfinite(gas_rate)) {
        bad("non-finite field");
    }
    if (pressure < 0.0 || pressure > params.vent_threshold_kpa) bad("pressure outside [0, vent threshold]");
    if (level < 0.0 || level > 1.0) bad("level outside [0, 1]");
    if (gas_cumulative < 0.0) bad("negative gas_cumulative");
    if (ph <= 0.0 || ph >= 14.0) bad("pH outside (0, 14)");
}

DigestorState initial_state(const SubstrateScenario& scenario, const PlantParams& params,
                            double temperature) {
    DigestorState s;
    s.temperature = temperature;
    s.ph = scenario.ph_opt;
    s.level = params.working_level();
    return s;
}

void SensorModel::validate() const {
    for (std::size_t i = 0; i < channels.size(); ++i) {
        const auto name = std::string(telemetry::to_string(telemetry::kAllChannels[i]));
        require(channels[i].sigma >= 0.0 && std::isfinite(channels[i].sigma),
                "sensors: " + name + " sigma must be >= 0");
        require(std::isfinite(channels[i].bias), "sensors: " + name + " bias must be finite");
        require(channels[i].sample_period_min > 0.0,
                "sensors: " + name + " sample_period must be > 0");
    }
}

SensorModel SensorModel::noiseless(double sample_period_min) {
    SensorModel m;
    for (auto& c : m.channels) c.sample_period_min = sample_period_min;
    return m;
}

SensorModel SensorModel::bench(std::uint64_t seed, double sample_period_min) {
    SensorModel m = noiseless(sample_period_min);
    m.seed = seed;
    m[Channel::temperature].sigma = 0.05;
    m[Channel::ph].sigma = 0.01;
    m[Channel::pressure].sigma = 0.05;
    m[Channel::gas_rate].sigma = 0.02;
    m[Channel::rpm].sigma = 0.5;
    return m;
}

SensorArray::SensorArray(SensorModel model) : model_(model), rng_(model.seed) {
    model_.validate();
    last_sample_min_.fill(-std::numeric_limits<double>::infinity());
}

std::vector<TelemetryRecord> SensorArray::sample(const DigestorState& state) {
    std::vector<TelemetryRecord> out;
    const double t_min = state.t * kMinutesPerDay;
    for (std::size_t i = 0; i < telemetry::kAllChannels.size(); ++i) {
        const auto& noise = model_.channels[i];
        if (t_min - last_sample_min_[i] < noise.sample_period_min - 1e-9) continue;
        last_sample_min_[i] = t_min;
        const Channel c = telemetry::kAllChannels[i];
        double value = true_value(state, c) + noise.bias;
        if (noise.sigma > 0.0) value += std::normal_distribution<double>(0.0, noise.sigma)(rng_);
        out.push_back({t_min, c, value,
                       std::isfinite(value) ? telemetry::Quality::ok : telemetry::Quality::sensor_fault});
    }
    return out;
}

double gompertz_cumulative(const KineticFraction& k, double t_days) {
    if (k.b0 == 0.0) return 0.0;
    return k.b0 * std::exp(-std::exp(k.rm * std::numbers::e / k.b0 * (k.lag - t_days) + 1.0));
}

double gompertz_cumulative(const SubstrateScenario& scenario, Fraction fraction, double t_days) {
    if (t_days < 0.0) throw InputError("gompertz: t must be >= 0");
    return gompertz_cumulative(scenario.fraction(fraction), t_days);
}

double gompertz_rate(const KineticFraction& k, double t_days) {
    if (k.b0 == 0.0) return 0.0;
    const double inner = std::exp(k.rm * std::numbers::e / k.b0 * (k.lag - t_days) + 1.0);
    return k.b0 * std::exp(-inner) * inner * k.rm * std::numbers::e / k.b0;
}

double temperature_factor(double temperature, double t_opt, double sigma_t) {
    const double z = (temperature - t_opt) / sigma_t;
    return std::exp(-z * z);
}

double ph_factor(double ph, double ph_opt, double sigma_ph) {
    const double z = (ph - ph_opt) / sigma_ph;
    return std::exp(-z * z);
}

namespace {

std::size_t feeds_by(const SubstrateScenario& s, double t_days) {
    if (s.feed_vs_per_day == 0.0 || t_days <= 0.0) return 0;
    return static_cast<std::size_t>(std::floor(t_days * 24.0 / s.feed_interval_h + 1e-9));
}

// Gas per gram since loading; the Gompertz curve is not exactly zero at age 0.
double cumulative_per_g(const SubstrateScenario& s, double age_days) {
    if (age_days <= 0.0) return 0.0;
    return gompertz_cumulative(s.fast, age_days) - gompertz_cumulative(s.fast, 0.0) +
           gompertz_cumulative(s.slow, age_days) - gompertz_cumulative(s.slow, 0.0);
}

}  // namespace

double SubstrateScenario::loaded_vs(double t_days) const {
    return vs_loaded + static_cast<double>(feeds_by(*this, t_days)) * feed_vs_per_day * feed_interval_h / 24.0;
}

double SubstrateScenario::potential_gas(double t0, double t1) const {
    double gas = vs_loaded * (cumulative_per_g(*this, t1) - cumulative_per_g(*this, t0));
    const double dose = feed_vs_per_day * feed_interval_h / 24.0;
    const std::size_t n = feeds_by(*this, t1);
    for (std::size_t k = 1; k <= n; ++k) {
        const double tk = static_cast<double>(k) * feed_interval_h / 24.0;
        gas += dose * (cumulative_per_g(*this, t1 - tk) - cumulative_per_g(*this, t0 - tk));
    }
    return gas;
}

double SubstrateScenario::potential_rate(double t) const {
    auto rate = [&](double age) {
        return age <= 0.0 ? 0.0 : gompertz_rate(fast, age) + gompertz_rate(slow, age);
    };
    double r = vs_loaded * rate(t);
    const double dose = feed_vs_per_day * feed_interval_h / 24.0;
    const std::size_t n = feeds_by(*this, t);
    for (std::size_t k = 1; k <= n; ++k) r += dose * rate(t - static_cast<double>(k) * feed_interval_h / 24.0);
    return r;
}

StepResult step_plant(const DigestorState& state, const SubstrateScenario& scenario,
                      const PlantParams& params, const Actuators& actuators, double dt_min,
                      SensorArray& sensors) {
    if (!(dt_min > 0.0) || !std::isfinite(dt_min)) throw InputError("step_plant: dt must be > 0");
    state.validate(params);

    const double dt_s = dt_min * kSecondsPerMinute;
    const double dt_d = dt_min / kMinutesPerDay;
    const double heater = std::max(0.0, actuators.heater_power);
    const double rpm = std::max(0.0, actuators.stirrer_rpm);

    // Thermal balance, degC/s.
    const double eta = params.heater_efficiency +
                       params.stir_efficiency_gain * std::min(rpm / params.stir_reference_rpm, 1.0);
    auto dT = [&](double T) {
        return (heater * eta - params.loss_w_per_c * (T - params.ambient_c)) / params.heat_capacity_j_per_c;
    };
    const double T0 = state.temperature;
    const double T_mid = T0 + 0.5 * dt_s * dT(T0);
    const double T1 = T0 + dt_s * dT(T_mid);

    // Uninhibited rate per gram of VS loaded so far, L/gVS/day.
    auto specific_rate = [&](double t) {
        const double vs = scenario.loaded_vs(t);
        return vs > 0.0 ? scenario.potential_rate(t) / vs : 0.0;
    };
    auto inhibition = [&](double T, double ph) {
        return temperature_factor(T, scenario.t_opt, params.sigma_t) *
               ph_factor(ph, scenario.ph_opt, params.sigma_ph);
    };

    // pH: drift toward the acidification floor in proportion to the specific
    // gas rate, first-order recovery toward ph_opt.
    const double t0 = state.t;
    const double t_half = t0 + 0.5 * dt_d;
    const double t1 = t0 + dt_d;
    double ph0 = state.ph, ph_mid = ph0, ph1 = ph0;
    if (actuators.ph_dosing) {
        ph0 = ph_mid = ph1 = scenario.ph_opt;
    } else {
        auto dph = [&](double t, double T, double ph) {
            const double r = specific_rate(t) * inhibition(T, ph);
            return -params.acidification_gain * r * (ph - params.ph_floor) +
                   (scenario.ph_opt - ph) / params.ph_recovery_days;
        };
        ph_mid = ph0 + 0.5 * dt_d * dph(t0, T0, ph0);
        ph1 = ph0 + dt_d * dph(t_half, T_mid, ph_mid);
    }

    // Gas: exact Gompertz increment over the step times midpoint inhibition.
    // Telescoping increments keep the total below the ultimate yield.
    const double gas_increment = scenario.potential_gas(t0, t1) * inhibition(T_mid, ph_mid);

    // Headspace: dP/dt = (P_atm / V_h) * (G - g * P), solved exactly for
    // constant production G over the step.
    const double production = gas_increment / dt_d;  // L/day
    const double conductance =
        params.outlet_conductance + (actuators.vent_open ? params.vent_conductance : 0.0);
    const double a = params.atmospheric_kpa / params.headspace_l();
    double P1 = 0.0;
    if (conductance > 0.0) {
        const double p_eq = production / conductance;
        P1 = p_eq + (state.pressure - p_eq) * std::exp(-a * conductance * dt_d);
    } else {
        P1 = state.pressure + a * production * dt_d;
    }
    P1 = std::clamp(P1, 0.0, params.vent_threshold_kpa);

    StepResult out;
    DigestorState& s = out.state;
    s.t = t1;
    s.temperature = T1;
    s.ph = ph1;
    s.pressure = P1;
    s.gas_cumulative = state.gas_cumulative + gas_increment;
    s.gas_rate = scenario.potential_rate(t1) * inhibition(T1, ph1);
    s.heater_power = heater;
    s.stirrer_rpm = rpm;
    s.level = params.working_level();
    out.telemetry = sensors.sample(s);
    return out;
}

ActuatorSchedule constant_schedule(Actuators actuators) {
    return [actuators](const DigestorState&, std::span<const TelemetryRecord>) { return actuators; };
}

std::vector<double> ScenarioRun::daily_gas() const {
    std::vector<double> out;
    if (trajectory.empty()) return out;
    auto gas_at = [&](double day) {
        auto it = std::lower_bound(trajectory.begin(), trajectory.end(), day - 1e-9,
                                   [](const DigestorState& s, double t) { return s.t < t; });
        if (it == trajectory.end()) return trajectory.back().gas_cumulative;
        if (it == trajectory.begin() || std::abs(it->t - day) < 1e-9) return it->gas_cumulative;
        const auto& hi = *it;
        const auto& lo = *(it - 1);
        const double w = (day - lo.t) / (hi.t - lo.t);
        return lo.gas_cumulative + w * (hi.gas_cumulative - lo.gas_cumulative);
    };
    const auto days = static_cast<int>(std::floor(trajectory.back().t + 1e-9));
    double prev = gas_at(0.0);
    for (int d = 1; d <= days; ++d) {
        const double g = gas_at(static_cast<double>(d));
        out.push_back(g - prev);
        prev = g;
    }
    return out;
}

ScenarioRun run_scenario(const SubstrateScenario& scenario, const PlantParams& params,
                         const DigestorState& initial, const ActuatorSchedule& schedule,
                         double duration_days, double dt_min, const SensorModel& sensors,
                         std::string run_id) {
    if (!(duration_days > 0.0)) throw InputError("run_scenario: duration must be > 0");
    if (!(dt_min > 0.0)) throw InputError("run_scenario: dt must be > 0");
    scenario.validate();
    params.validate();

    ScenarioRun run{{}, telemetry::TelemetryStore(std::move(run_id)), dt_min};
    SensorArray array(sensors);
    const auto steps = static_cast<std::size_t>(std::llround(duration_days * kMinutesPerDay / dt_min));
    run.trajectory.reserve(steps + 1);
    run.trajectory.push_back(initial);

    std::vector<TelemetryRecord> latest = array.sample(initial);
    run.telemetry.append(latest);
    DigestorState state = initial;
    for (std::size_t i = 0; i < steps; ++i) {
        const Actuators act = schedule(state, latest);
        auto res = step_plant(state, scenario, params, act, dt_min, array);
        // Re-derive time from the step index so long runs do not drift.
        res.state.t = initial.t + static_cast<double>(i + 1) * dt_min / kMinutesPerDay;
        state = res.state;
        if (!res.telemetry.empty()) {
            run.telemetry.append(res.telemetry);
            latest = std::move(res.telemetry);
        }
        run.trajectory.push_back(state);
    }
    return run;
}

SubstrateScenario scenario_from_json(const nlohmann::json& j) {
    SubstrateScenario s;
    try {
        s.name = j.at("name").get<std::string>();
        s.fast = {j.at("b0_fast").get<double>(), j.at("rm_fast").get<double>(),
                  j.at("lambda_fast").get<double>()};
        s.slow = {j.at("b0_slow").get<double>(), j.at("rm_slow").get<double>(),
                  j.at("lambda_slow").get<double>()};
        s.vs_loaded = j.at("vs_loaded").get<double>();
        s.t_opt = j.at("t_opt").get<double>();
        s.ph_opt = j.at("ph_opt").get<double>();
        s.feed_vs_per_day = j.value("feed_vs_per_day", 0.0);
        s.feed_interval_h = j.value("feed_interval_h", 6.0);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("scenario: ") + e.what());
    }
    s.validate();
    return s;
}

nlohmann::json to_json(const SubstrateScenario& s) {
    return {
        {"name", s.name},
        {"b0_fast", s.fast.b0},
        {"rm_fast", s.fast.rm},
        {"lambda_fast", s.fast.lag},
        {"b0_slow", s.slow.b0},
        {"rm_slow", s.slow.rm},
        {"lambda_slow", s.slow.lag},
        {"vs_loaded", s.vs_loaded},
        {"t_opt", s.t_opt},
        {"ph_opt", s.ph_opt},
        {"feed_vs_per_day", s.feed_vs_per_day},
        {"feed_interval_h", s.feed_interval_h},
    };
}

PlantParams plant_params_from_json(const nlohmann::json& j, PlantParams p) {
    try {
        p.vessel_volume_l = j.value("vessel_volume_l", p.vessel_volume_l);
        p.headspace_fraction = j.value("headspace_fraction", p.headspace_fraction);
        p.vent_threshold_kpa = j.value("vent_threshold_kpa", p.vent_threshold_kpa);
        p.atmospheric_kpa = j.value("atmospheric_kpa", p.atmospheric_kpa);
        p.ambient_c = j.value("ambient_c", p.ambient_c);
        p.heat_capacity_j_per_c = j.value("heat_capacity_j_per_c", p.heat_capacity_j_per_c);
        p.loss_w_per_c = j.value("loss_w_per_c", p.loss_w_per_c);
        p.heater_efficiency = j.value("heater_efficiency", p.heater_efficiency);
        p.stir_efficiency_gain = j.value("stir_efficiency_gain", p.stir_efficiency_gain);
        p.stir_reference_rpm = j.value("stir_reference_rpm", p.stir_reference_rpm);
        p.sigma_t = j.value("sigma_t", p.sigma_t);
        p.sigma_ph = j.value("sigma_ph", p.sigma_ph);
        p.ph_floor = j.value("ph_floor", p.ph_floor);
        p.acidification_gain = j.value("acidification_gain", p.acidification_gain);
        p.ph_recovery_days = j.value("ph_recovery_days", p.ph_recovery_days);
        p.outlet_conductance = j.value("outlet_conductance", p.outlet_conductance);
        p.vent_conductance = j.value("vent_conductance", p.vent_conductance);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("plant: ") + e.what());
    }
    p.validate();
    return p;
}

nlohmann::json to_json(const PlantParams& p) {
    return {
        {"vessel_volume_l", p.vessel_volume_l},
        {"headspace_fraction", p.headspace_fraction},
        {"vent_threshold_kpa", p.vent_threshold_kpa},
        {"atmospheric_kpa", p.atmospheric_kpa},
        {"ambient_c", p.ambient_c},
        {"heat_capacity_j_per_c", p.heat_capacity_j_per_c},
        {"loss_w_per_c", p.loss_w_per_c},
        {"heater_efficiency", p.heater_efficiency},
        {"stir_efficiency_gain", p.stir_efficiency_gain},
        {"stir_reference_rpm", p.stir_reference_rpm},
        {"sigma_t", p.sigma_t},
        {"sigma_ph", p.sigma_ph},
        {"ph_floor", p.ph_floor},
        {"acidification_gain", p.acidification_gain},
        {"ph_recovery_days", p.ph_recovery_days},
        {"outlet_conductance", p.outlet_conductance},
        {"vent_conductance", p.vent_conductance},
    };
}

ScenarioFile load_scenario_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("scenario file not found: " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("scenario file " + path.string() + ": " + e.what());
    }
    ScenarioFile f;
    f.scenario = scenario_from_json(j);
    f.plant = plant_params_from_json(j.value("plant", nlohmann::json::object()));
    return f;
}

}  // namespace wastetwin::digestor
