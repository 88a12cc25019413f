#include "wastetwin/control.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "wastetwin/error.hpp"
#include "wastetwin/util.hpp"

namespace wastetwin::control {

using digestor::Actuators;
using digestor::DigestorState;
using telemetry::Channel;
using telemetry::TelemetryRecord;

namespace {
constexpr double kMinutesPerDay = 1440.0;
}

// ---------------------------------------------------------------------------
// PID

void PidGains::validate() const {
    if (!(kp >= 0.0 && ki >= 0.0 && kd >= 0.0)) throw ConfigError("pid: gains must be >= 0");
    if (!(output_min < output_max)) throw ConfigError("pid: output_min must be < output_max");
    if (!(integral_clamp >= 0.0)) throw ConfigError("pid: integral_clamp must be >= 0");
}

PidOutput pid_step(const PidGains& gains, double setpoint, double measurement, double dt_min,
                   const PidState& state) {
    if (!(dt_min > 0.0)) throw InputError("pid: dt must be > 0");
    if (!std::isfinite(measurement)) throw SensorFaultError("pid: non-finite temperature measurement");
    if (!std::isfinite(setpoint)) throw InputError("pid: non-finite setpoint");

    const double error = setpoint - measurement;
    const double p_term = gains.kp * error;
    double d_term = 0.0;
    if (state.previous_measurement) {
        d_term = -gains.kd * (measurement - *state.previous_measurement) / dt_min;
    }

    PidOutput out;
    out.state = state;
    out.state.previous_measurement = measurement;

    const double candidate = std::clamp(state.integral + gains.ki * error * dt_min,
                                        -gains.integral_clamp, gains.integral_clamp);
    const double unsaturated = p_term + candidate + d_term;
    const bool saturates = unsaturated > gains.output_max || unsaturated < gains.output_min;
    // Conditional integration: hold the integral while the output saturates.
    const double integral = saturates ? std::clamp(state.integral, -gains.integral_clamp,
                                                   gains.integral_clamp)
                                      : candidate;
    const double raw = p_term + integral + d_term;
    out.heater_power = std::clamp(raw, gains.output_min, gains.output_max);
    out.state.integral = integral;
    out.state.saturated = raw > gains.output_max || raw < gains.output_min;
    return out;
}

double holding_integral(const digestor::PlantParams& plant, double temperature, double rpm,
                        const PidGains& gains) {
    const double eta = plant.heater_efficiency +
                       plant.stir_efficiency_gain * std::min(rpm / plant.stir_reference_rpm, 1.0);
    const double need = plant.loss_w_per_c * (temperature - plant.ambient_c) / eta;
    return std::clamp(need, -gains.integral_clamp, gains.integral_clamp);
}

digestor::ScenarioRun run_pid_batch(const digestor::SubstrateScenario& scenario,
                                    const digestor::PlantParams& plant, const DigestorState& initial,
                                    const PidGains& gains, const BatchSetup& setup,
                                    const digestor::SensorModel& sensors, std::string run_id) {
    scenario.validate();
    plant.validate();
    gains.validate();
    sensors.validate();
    if (!(setup.duration_days > 0.0)) throw InputError("batch: duration must be > 0");
    if (!(setup.record_dt_min > 0.0) || !(setup.control_dt_min > 0.0)) {
        throw InputError("batch: time steps must be > 0");
    }
    const double ratio = setup.record_dt_min / setup.control_dt_min;
    const auto substeps = static_cast<std::size_t>(std::llround(ratio));
    if (substeps == 0 || std::abs(ratio - static_cast<double>(substeps)) > 1e-9) {
        throw InputError("batch: control_dt_min must divide record_dt_min");
    }

    digestor::ScenarioRun run{{}, telemetry::TelemetryStore(std::move(run_id)), setup.record_dt_min};
    digestor::SensorArray array(sensors);
    const auto steps = static_cast<std::size_t>(std::llround(setup.duration_days * kMinutesPerDay /
                                                             setup.record_dt_min));
    run.trajectory.reserve(steps + 1);
    run.trajectory.push_back(initial);

    double reading = initial.temperature;
    auto keep = [&](std::vector<TelemetryRecord> recs) {
        for (const auto& r : recs) {
            if (r.channel == Channel::temperature && r.quality == telemetry::Quality::ok) reading = r.value;
        }
        run.telemetry.append(recs);
    };
    keep(array.sample(initial));

    PidState pid;
    pid.integral = holding_integral(plant, setup.setpoint, setup.rpm, gains);
    DigestorState state = initial;
    std::size_t tick = 0;
    for (std::size_t i = 0; i < steps; ++i) {
        for (std::size_t k = 0; k < substeps; ++k, ++tick) {
            const auto out = pid_step(gains, setup.setpoint, reading, setup.control_dt_min, pid);
            pid = out.state;
            digestor::Actuators act;
            act.heater_power = out.heater_power;
            act.stirrer_rpm = setup.rpm;
            auto res = digestor::step_plant(state, scenario, plant, act, setup.control_dt_min, array);
            res.state.t = initial.t + static_cast<double>(tick + 1) * setup.control_dt_min / kMinutesPerDay;
            state = res.state;
            keep(std::move(res.telemetry));
        }
        run.trajectory.push_back(state);
    }
    return run;
}

// ---------------------------------------------------------------------------
// Safety

std::string to_string(SafetyAction a) {
    switch (a) {
        case SafetyAction::clamp_actuators: return "clamp_actuators";
        case SafetyAction::emergency_vent: return "emergency_vent";
        case SafetyAction::halt: return "halt";
    }
    return "unknown";
}

SafetyAction safety_action_from_string(const std::string& name) {
    if (name == "clamp_actuators") return SafetyAction::clamp_actuators;
    if (name == "emergency_vent") return SafetyAction::emergency_vent;
    if (name == "halt") return SafetyAction::halt;
    throw ConfigError("safety: unknown action '" + name + "'");
}

void SafetyEnvelope::validate() const {
    for (auto [name, lim] : {std::pair{"temperature", temperature}, std::pair{"ph", ph},
                             std::pair{"pressure", pressure}}) {
        if (!(lim.min < lim.max)) {
            throw ConfigError(std::string("safety: ") + name + " requires min < max");
        }
    }
    if (!(heater_min < heater_max)) throw ConfigError("safety: heater_min must be < heater_max");
}

SafetyOutcome enforce_safety(const DigestorState& state, const SafetyEnvelope& envelope,
                             Actuators actuators) {
    SafetyOutcome out;
    const double t_min = state.t * 1440.0;

    auto check = [&](const char* channel, double value, const ChannelLimits& lim, auto&& clamp_low,
                     auto&& clamp_high) {
        const bool low = value < lim.min;
        const bool high = value > lim.max;
        if (!low && !high) return;
        out.events.push_back({t_min, channel, lim.action, value});
        switch (lim.action) {
            case SafetyAction::clamp_actuators:
                if (low) clamp_low(actuators);
                else clamp_high(actuators);
                break;
            case SafetyAction::emergency_vent:
                actuators.vent_open = true;
                actuators.heater_power = envelope.heater_min;
                break;
            case SafetyAction::halt:
                actuators.heater_power = envelope.heater_min;
                actuators.stirrer_rpm = 0.0;
                actuators.vent_open = true;
                out.halted = true;
                break;
        }
    };

    check("temperature", state.temperature, envelope.temperature,
          [&](Actuators& a) { a.heater_power = envelope.heater_max; },
          [&](Actuators& a) { a.heater_power = envelope.heater_min; });
    check("ph", state.ph, envelope.ph,
          [](Actuators& a) { a.ph_dosing = true; },
          [](Actuators& a) { a.ph_dosing = false; });
    check("pressure", state.pressure, envelope.pressure,
          [](Actuators& a) { a.vent_open = false; },
          [](Actuators& a) { a.vent_open = true; });

    out.actuators = actuators;
    return out;
}

void write_safety_csv(std::ostream& out, const std::vector<SafetyEvent>& events) {
    out << "time,channel,action\n";
    for (const auto& e : events) out << format_double(e.t_min) << ',' << e.channel << ',' << to_string(e.action) << '\n';
}

// ---------------------------------------------------------------------------
// Campaign

std::string to_string(ObjectiveKind k) {
    return k == ObjectiveKind::maximize_gas_rate ? "maximize_gas_rate" : "track_pressure_target";
}

ObjectiveKind objective_kind_from_string(const std::string& name) {
    if (name == "maximize_gas_rate" || name == "maximize_gas") return ObjectiveKind::maximize_gas_rate;
    if (name == "track_pressure_target" || name == "track_pressure") {
        return ObjectiveKind::track_pressure_target;
    }
    throw ConfigError("objective: unknown kind '" + name + "'");
}

void AdaptationPolicy::validate(const SafetyEnvelope& envelope) const {
    if (!(refit_period_h > 0.0)) throw ConfigError("policy: refit_period must be > 0");
    if (!(window_h > 0.0)) throw ConfigError("policy: window must be > 0");
    if (!(warmup_h >= 0.0) || !(bootstrap_h >= 0.0)) {
        throw ConfigError("policy: warmup and bootstrap durations must be >= 0");
    }
    if (bootstrap_h > 0.0 && bootstrap_points == 0) {
        throw ConfigError("policy: bootstrap needs at least one point");
    }
    if (!(row_period_min > 0.0) || !(control_dt_min > 0.0) || !(settle_min >= 0.0)) {
        throw ConfigError("policy: row_period and control_dt must be > 0, settle >= 0");
    }
    if (!(evaluation_horizon_h > 0.0)) throw ConfigError("policy: evaluation_horizon must be > 0");
    if (grid_points < 2) throw ConfigError("policy: grid_points must be >= 2");
    if (!(move_penalty >= 0.0)) throw ConfigError("policy: move_penalty must be >= 0");
    const auto& T = setpoint_bounds.temperature;
    const auto& R = setpoint_bounds.rpm;
    if (!(T.lower <= T.upper) || !(R.lower <= R.upper)) {
        throw ConfigError("policy: setpoint bounds require lower <= upper");
    }
    if (R.lower < 0.0) throw ConfigError("policy: rpm bounds must be >= 0");
    if (T.lower < envelope.temperature.min || T.upper > envelope.temperature.max) {
        throw ConfigError("policy: temperature setpoint bounds must lie inside the safety envelope");
    }
    if (objective.kind == ObjectiveKind::track_pressure_target &&
        !(objective.pressure_target_kpa >= envelope.pressure.min &&
          objective.pressure_target_kpa <= envelope.pressure.max)) {
        throw ConfigError("policy: pressure target must lie inside the safety envelope");
    }
}

std::vector<std::pair<double, double>> CampaignReport::pressure_trace() const {
    std::vector<std::pair<double, double>> out;
    const std::array<Channel, 1> ch{Channel::pressure};
    for (const auto& r : telemetry.read_window(ch, -1e300, 1e300)) out.emplace_back(r.t_min, r.value);
    return out;
}

double stabilization_ratio(const std::vector<double>& values) {
    if (values.size() < 5) throw MetricError("stabilization: need at least 5 samples");
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double range = *hi - *lo;
    const std::size_t tail_begin = values.size() - values.size() / 5;
    const auto n = static_cast<double>(values.size() - tail_begin);
    const double mean = std::accumulate(values.begin() + static_cast<std::ptrdiff_t>(tail_begin),
                                        values.end(), 0.0) / n;
    double ss = 0.0;
    for (std::size_t i = tail_begin; i < values.size(); ++i) ss += (values[i] - mean) * (values[i] - mean);
    const double sd = std::sqrt(ss / n);
    if (range == 0.0) return 0.0;
    return sd / range;
}

namespace {

/// Latest reading per channel; seeded from the true initial state.
struct Readings {
    std::array<double, telemetry::kAllChannels.size()> value{};

    void update(const std::vector<TelemetryRecord>& records) {
        for (const auto& r : records) {
            if (r.quality == telemetry::Quality::ok) value[static_cast<std::size_t>(r.channel)] = r.value;
        }
    }
    double operator[](Channel c) const { return value[static_cast<std::size_t>(c)]; }

    DigestorState as_state(double t_days) const {
        DigestorState s;
        s.t = t_days;
        s.temperature = (*this)[Channel::temperature];
        s.ph = (*this)[Channel::ph];
        s.pressure = (*this)[Channel::pressure];
        s.gas_rate = (*this)[Channel::gas_rate];
        s.gas_cumulative = (*this)[Channel::gas_cumulative];
        s.level = (*this)[Channel::level];
        s.stirrer_rpm = (*this)[Channel::rpm];
        s.heater_power = (*this)[Channel::heater_power];
        return s;
    }
};

struct HistoryRow {
    double t_min;
    Setpoint setpoint;
};

/// Box actually searched: policy bounds intersected with the envelope.
SetpointBounds effective_bounds(const AdaptationPolicy& policy, const SafetyEnvelope& envelope) {
    SetpointBounds b = policy.setpoint_bounds;
    b.temperature.lower = std::max(b.temperature.lower, envelope.temperature.min);
    b.temperature.upper = std::min(b.temperature.upper, envelope.temperature.max);
    return b;
}

Setpoint clamp_setpoint(Setpoint s, const SetpointBounds& b) {
    s.temperature = std::clamp(s.temperature, b.temperature.lower, b.temperature.upper);
    s.rpm = std::clamp(s.rpm, b.rpm.lower, b.rpm.upper);
    return s;
}

std::vector<Setpoint> latin_hypercube(std::size_t n, const SetpointBounds& b, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<std::size_t> perm_t(n), perm_r(n);
    std::iota(perm_t.begin(), perm_t.end(), 0);
    std::iota(perm_r.begin(), perm_r.end(), 0);
    std::shuffle(perm_t.begin(), perm_t.end(), rng);
    std::shuffle(perm_r.begin(), perm_r.end(), rng);
    std::vector<Setpoint> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double ut = (static_cast<double>(perm_t[i]) + unit(rng)) / static_cast<double>(n);
        const double ur = (static_cast<double>(perm_r[i]) + unit(rng)) / static_cast<double>(n);
        out[i].temperature = b.temperature.lower + ut * b.temperature.width();
        out[i].rpm = b.rpm.lower + ur * b.rpm.width();
    }
    return out;
}

Channel target_channel(const ObjectiveSpec& o) {
    return o.kind == ObjectiveKind::track_pressure_target ? Channel::pressure : Channel::gas_rate;
}

double mean_of(const std::vector<TelemetryRecord>& records, Channel c, double from, double to) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : records) {
        if (r.channel == c && r.t_min >= from && r.t_min < to && r.quality == telemetry::Quality::ok) {
            sum += r.value;
            ++n;
        }
    }
    return n ? sum / static_cast<double>(n) : std::nan("");
}

/// One row per row_period bucket inside [from, to): mean setpoint
/// (temperature, rpm), mean measured pH -> mean measured target channel.
surrogate::Dataset build_dataset(const telemetry::TelemetryStore& store,
                                 const std::vector<HistoryRow>& history,
                                 const std::vector<double>& change_times, const AdaptationPolicy& policy,
                                 double from, double to) {
    surrogate::Dataset data;
    const Channel target = target_channel(policy.objective);
    const std::array<Channel, 2> channels{Channel::ph, target};
    const auto records = store.read_window(channels, from, to);
    const double w = policy.row_period_min;
    for (double b0 = std::ceil(from / w) * w; b0 + w <= to + 1e-9; b0 += w) {
        const double b1 = b0 + w;
        // Latest setpoint change strictly before the bucket end.
        auto it = std::lower_bound(change_times.begin(), change_times.end(), b1);
        if (it != change_times.begin() && *(it - 1) > b0 - policy.settle_min) continue;

        auto lo = std::lower_bound(history.begin(), history.end(), b0,
                                   [](const HistoryRow& h, double t) { return h.t_min < t; });
        double st = 0.0, sr = 0.0;
        std::size_t n = 0;
        for (auto h = lo; h != history.end() && h->t_min < b1; ++h, ++n) {
            st += h->setpoint.temperature;
            sr += h->setpoint.rpm;
        }
        if (n == 0) continue;
        const double ph = mean_of(records, Channel::ph, b0, b1);
        const double y = mean_of(records, target, b0, b1);
        if (!std::isfinite(ph) || !std::isfinite(y)) continue;
        data.add({st / static_cast<double>(n), sr / static_cast<double>(n), ph}, y);
    }
    return data;
}

struct Optimized {
    Setpoint setpoint;
    std::optional<pso::OptimizationResult> result;
};

/// Minimizes the surrogate objective over the non-degenerate setpoint
/// dimensions; collapsed dimensions are held at their single value.
Optimized optimize_setpoint(const surrogate::RegressionModel& model, const AdaptationPolicy& policy,
                            const SetpointBounds& bounds, const Setpoint& current, double ph,
                            std::uint64_t seed) {
    const std::array<pso::Interval, 2> box{bounds.temperature, bounds.rpm};
    std::vector<std::size_t> free_dims;
    for (std::size_t d = 0; d < box.size(); ++d) {
        if (box[d].width() > 0.0) free_dims.push_back(d);
    }
    Setpoint fixed{bounds.temperature.lower, bounds.rpm.lower};
    auto to_setpoint = [&](std::span<const double> x) {
        std::array<double, 2> v{fixed.temperature, fixed.rpm};
        for (std::size_t i = 0; i < free_dims.size(); ++i) v[free_dims[i]] = x[i];
        return Setpoint{v[0], v[1]};
    };
    if (free_dims.empty()) return {fixed, std::nullopt};

    auto objective = [&](std::span<const double> x) {
        const Setpoint s = to_setpoint(x);
        const double y = model.predict({s.temperature, s.rpm, ph});
        double move = 0.0;
        if (bounds.temperature.width() > 0.0) {
            move += std::pow((s.temperature - current.temperature) / bounds.temperature.width(), 2);
        }
        if (bounds.rpm.width() > 0.0) move += std::pow((s.rpm - current.rpm) / bounds.rpm.width(), 2);
        const double penalty = policy.move_penalty * move;
        if (policy.objective.kind == ObjectiveKind::track_pressure_target) {
            const double e = y - policy.objective.pressure_target_kpa;
            return e * e + penalty;
        }
        return -y + penalty;
    };

    pso::PsoConfig cfg = policy.pso;
    cfg.bounds.clear();
    for (std::size_t d : free_dims) cfg.bounds.push_back(box[d]);
    cfg.seed = seed;
    auto result = pso::optimize(cfg, objective, free_dims.size());
    return {to_setpoint(result.best_position), std::move(result)};
}

/// Closed-loop plant under PID heating at a setpoint.
struct Loop {
    const CampaignInputs* in = nullptr;
    DigestorState plant;
    digestor::SensorArray sensors;
    PidState pid;
    Readings readings;
    bool halted = false;

    std::vector<TelemetryRecord> tick(const Setpoint& sp, std::vector<SafetyEvent>* events) {
        const double dt = in->policy.control_dt_min;
        Actuators act;
        const auto pid_out = pid_step(in->gains, sp.temperature, readings[Channel::temperature], dt, pid);
        pid = pid_out.state;
        act.heater_power = pid_out.heater_power;
        act.stirrer_rpm = sp.rpm;
        auto safety = enforce_safety(readings.as_state(plant.t), in->envelope, act);
        if (events) events->insert(events->end(), safety.events.begin(), safety.events.end());
        halted = halted || safety.halted;
        if (halted) {
            safety.actuators.heater_power = in->envelope.heater_min;
            safety.actuators.stirrer_rpm = 0.0;
            safety.actuators.vent_open = true;
        }
        auto res = digestor::step_plant(plant, in->scenario, in->plant, safety.actuators, dt, sensors);
        plant = res.state;
        readings.update(res.telemetry);
        return std::move(res.telemetry);
    }
};

}  // namespace

CampaignReport run_adaptive_campaign(const CampaignInputs& in) {
    in.scenario.validate();
    in.plant.validate();
    in.gains.validate();
    in.envelope.validate();
    in.policy.validate(in.envelope);
    in.sensors.validate();
    if (!(in.duration_days > 0.0)) throw ConfigError("campaign: duration must be > 0");

    const AdaptationPolicy& policy = in.policy;
    const SetpointBounds bounds = effective_bounds(policy, in.envelope);
    const double dt = policy.control_dt_min;
    const double start_min = in.initial.t * kMinutesPerDay;
    const double end_min = start_min + in.duration_days * kMinutesPerDay;
    const double warmup_end = start_min + policy.warmup_h * 60.0;
    const double bootstrap_end = warmup_end + policy.bootstrap_h * 60.0;
    const auto lhs = latin_hypercube(policy.bootstrap_points, bounds, policy.seed ^ 0x5eedULL);

    const Setpoint current_nominal = clamp_setpoint(policy.nominal, bounds);
    CampaignReport report;
    report.objective = policy.objective;
    report.telemetry = telemetry::TelemetryStore("campaign");

    Loop loop{&in, in.initial, digestor::SensorArray(in.sensors), {}, {}, false};
    loop.pid.integral = holding_integral(in.plant, current_nominal.temperature, current_nominal.rpm, in.gains);
    {
        auto first = loop.sensors.sample(loop.plant);
        loop.readings.update(first);
        report.telemetry.append(first);
    }

    std::vector<HistoryRow> history;
    std::vector<double> change_times;
    Setpoint current = clamp_setpoint(policy.nominal, bounds);
    report.setpoint_log.emplace_back(start_min, current);
    change_times.push_back(start_min);

    std::optional<surrogate::RegressionModel> last_model;
    double next_refit = bootstrap_end;
    std::size_t cycle_index = 0;

    const auto steps = static_cast<std::size_t>(std::llround((end_min - start_min) / dt));
    for (std::size_t i = 0; i < steps; ++i) {
        const double t = start_min + static_cast<double>(i) * dt;

        Setpoint wanted = current;
        if (t >= warmup_end && t < bootstrap_end && !lhs.empty()) {
            const double hold = policy.bootstrap_h * 60.0 / static_cast<double>(lhs.size());
            const auto k = std::min(lhs.size() - 1, static_cast<std::size_t>((t - warmup_end) / hold));
            wanted = lhs[k];
        }
        if (t >= next_refit - 1e-9) {
            CycleRecord cycle;
            cycle.index = cycle_index;
            cycle.t_h = (t - start_min) / 60.0;
            cycle.chosen = cycle.applied = current;
            try {
                if (in.inject_fit_failure && in.inject_fit_failure(cycle_index)) {
                    throw FitError("surrogate: injected fit failure");
                }
                const double window_from = std::max(start_min, t - policy.window_h * 60.0);
                const bool anchored = policy.anchor_bootstrap && bootstrap_end > warmup_end;
                surrogate::Dataset data;
                if (anchored) {
                    data = build_dataset(report.telemetry, history, change_times, policy, warmup_end, bootstrap_end);
                }
                const auto recent = build_dataset(report.telemetry, history, change_times, policy,
                                                  anchored ? std::max(window_from, bootstrap_end) : window_from, t);
                for (std::size_t k = 0; k < recent.rows(); ++k) data.add(recent.inputs[k], recent.targets[k]);
                cycle.rows = data.rows();
                auto model = surrogate::fit(data, policy.feature_map);
                cycle.train_r2 = model.train_r2();
                const double ph_now = mean_of(
                    report.telemetry.read_window(std::array<Channel, 1>{Channel::ph}, t - policy.row_period_min, t),
                    Channel::ph, t - policy.row_period_min, t + 1e-9);
                auto opt = optimize_setpoint(model, policy, bounds, current, ph_now,
                                             policy.seed + 1000003ULL * (cycle_index + 1));
                cycle.chosen = opt.setpoint;
                cycle.applied = clamp_setpoint(opt.setpoint, bounds);
                cycle.predicted = model.predict({cycle.applied.temperature, cycle.applied.rpm, ph_now});
                cycle.pso = std::move(opt.result);
                cycle.model = model;
                last_model = std::move(model);
                wanted = cycle.applied;
            } catch (const FitError& e) {
                cycle.degraded = true;
                cycle.message = e.what();
                report.events.push_back({t, "degraded_cycle",
                                         "cycle " + std::to_string(cycle_index) + ": " + e.what()});
                wanted = current;
            }
            report.cycles.push_back(std::move(cycle));
            ++cycle_index;
            next_refit += policy.refit_period_h * 60.0;
        }

        if (!(wanted == current)) {
            current = wanted;
            report.setpoint_log.emplace_back(t, current);
            change_times.push_back(t);
        }
        history.push_back({t, current});

        const bool was_halted = loop.halted;
        auto records = loop.tick(current, &report.safety_events);
        if (loop.halted && !was_halted) report.events.push_back({t, "halt", "safety envelope requested halt"});
        report.telemetry.append(records);
    }
    report.final_state = loop.plant;

    // Held-out check: fresh closed-loop runs from the final state on a grid.
    if (last_model) {
        const std::size_t g = policy.grid_points;
        const Channel target = target_channel(policy.objective);
        const auto horizon = static_cast<std::size_t>(std::llround(policy.evaluation_horizon_h * 60.0 / dt));
        const double tail_min = std::min(policy.row_period_min, policy.evaluation_horizon_h * 60.0);
        std::vector<double> observed, predicted;
        for (std::size_t a = 0; a < g; ++a) {
            for (std::size_t b = 0; b < g; ++b) {
                const double fa = static_cast<double>(a) / static_cast<double>(g - 1);
                const double fb = static_cast<double>(b) / static_cast<double>(g - 1);
                const Setpoint sp{bounds.temperature.lower + fa * bounds.temperature.width(),
                                  bounds.rpm.lower + fb * bounds.rpm.width()};
                Loop probe = loop;
                const double t0 = probe.plant.t * kMinutesPerDay;
                std::vector<TelemetryRecord> tail;
                for (std::size_t k = 0; k < horizon; ++k) {
                    auto recs = probe.tick(sp, nullptr);
                    for (auto& r : recs) {
                        if (r.t_min > t0 + horizon * dt - tail_min + 1e-9) tail.push_back(r);
                    }
                }
                HoldoutPoint hp;
                hp.setpoint = sp;
                hp.ph = mean_of(tail, Channel::ph, -1e300, 1e300);
                hp.observed = mean_of(tail, target, -1e300, 1e300);
                hp.predicted = last_model->predict({sp.temperature, sp.rpm, hp.ph});
                observed.push_back(hp.observed);
                predicted.push_back(hp.predicted);
                report.holdout.push_back(hp);
            }
        }
        try {
            report.final_holdout_r2 = surrogate::r2_score(observed, predicted);
        } catch (const MetricError& e) {
            report.events.push_back({end_min, "holdout_undefined", e.what()});
        }
    }
    report.telemetry.close();
    return report;
}

nlohmann::json to_json(const CampaignReport& r) {
    using nlohmann::json;
    auto sp = [](const Setpoint& s) { return json{{"temperature", s.temperature}, {"rpm", s.rpm}}; };
    json cycles = json::array();
    for (const auto& c : r.cycles) {
        json jc{{"index", c.index},
                {"t_h", c.t_h},
                {"degraded", c.degraded},
                {"rows", c.rows},
                {"train_r2", c.train_r2 ? json(*c.train_r2) : json(nullptr)},
                {"chosen", sp(c.chosen)},
                {"applied", sp(c.applied)},
                {"predicted", c.predicted}};
        if (!c.message.empty()) jc["message"] = c.message;
        if (c.pso) {
            jc["pso"] = {{"best_value", c.pso->best_value},
                         {"iterations", c.pso->iterations_run},
                         {"terminated_by", pso::to_string(c.pso->terminated_by)}};
        }
        if (c.model) jc["surrogate"] = surrogate::to_json(*c.model);
        cycles.push_back(std::move(jc));
    }
    json holdout = json::array();
    for (const auto& h : r.holdout) {
        holdout.push_back({{"setpoint", sp(h.setpoint)},
                           {"ph", h.ph},
                           {"observed", h.observed},
                           {"predicted", h.predicted}});
    }
    json events = json::array();
    for (const auto& e : r.events) events.push_back({{"t_min", e.t_min}, {"kind", e.kind}, {"detail", e.detail}});
    json log = json::array();
    for (const auto& [t, s] : r.setpoint_log) log.push_back({{"t_min", t}, {"setpoint", sp(s)}});

    std::vector<double> pressure;
    for (const auto& [t, v] : r.pressure_trace()) pressure.push_back(v);
    json stab = nullptr;
    if (pressure.size() >= 5) stab = stabilization_ratio(pressure);

    return {
        {"objective",
         {{"kind", to_string(r.objective.kind)}, {"pressure_target_kpa", r.objective.pressure_target_kpa}}},
        {"cycles", cycles},
        {"final_holdout_r2", r.final_holdout_r2 ? json(*r.final_holdout_r2) : json(nullptr)},
        {"holdout", holdout},
        {"pressure_stabilization_ratio", stab},
        {"safety_event_count", r.safety_events.size()},
        {"events", events},
        {"setpoint_log", log},
        {"final_state",
         {{"t_days", r.final_state.t},
          {"temperature", r.final_state.temperature},
          {"ph", r.final_state.ph},
          {"pressure", r.final_state.pressure},
          {"gas_cumulative", r.final_state.gas_cumulative}}},
    };
}

}  // namespace wastetwin::control
