#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "wastetwin/control.hpp"
#include "wastetwin/error.hpp"

using namespace wastetwin;
using namespace wastetwin::control;

namespace {

const std::string kScenarios = std::string(WASTETWIN_DATA_DIR) + "/scenarios/";

digestor::ScenarioFile load(const std::string& name) {
    return digestor::load_scenario_file(kScenarios + name + ".json");
}

// Short campaign on the fed scenario; the defaults but fewer days.
CampaignInputs small_campaign(double days = 4.0) {
    const auto f = load("food_waste_fed");
    CampaignInputs in;
    in.scenario = f.scenario;
    in.plant = f.plant;
    in.initial = digestor::initial_state(f.scenario, f.plant, 37.0);
    in.initial.t = 30.0;
    in.sensors = digestor::SensorModel::bench(11);
    in.duration_days = days;
    in.policy.seed = 7;
    return in;
}

}  // namespace

TEST_CASE("pid basics") {
    PidGains g;
    g.kp = 10;
    g.ki = 0;
    g.kd = 0;
    g.output_min = -1000;
    g.output_max = 1000;
    CHECK(pid_step(g, 37.0, 37.0, 1.0, {}).heater_power == 0.0);
    CHECK(pid_step(g, 37.0, 35.0, 1.0, {}).heater_power == 20.0);
    g.output_max = 15.0;
    CHECK(pid_step(g, 37.0, 35.0, 1.0, {}).heater_power == 15.0);

    PidGains floor;
    floor.output_min = 5.0;
    CHECK(pid_step(floor, 37.0, 37.0, 1.0, {}).heater_power == 5.0);

    CHECK_THROWS_AS(pid_step(g, 37.0, std::nan(""), 1.0, {}), SensorFaultError);
    CHECK_THROWS_AS(pid_step(g, 37.0, 36.0, 0.0, {}), InputError);

    PidGains bad;
    bad.kd = -1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = {};
    bad.output_min = bad.output_max;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("derivative acts on the measurement") {
    PidGains g;
    g.kp = 0;
    g.ki = 0;
    g.kd = 10;
    g.output_min = -1000;
    g.output_max = 1000;
    PidState s;
    s.previous_measurement = 36.0;
    // Setpoint jumps do not kick the derivative.
    CHECK(pid_step(g, 50.0, 36.0, 1.0, s).heater_power == 0.0);
    CHECK(pid_step(g, 37.0, 36.5, 1.0, s).heater_power == doctest::Approx(-5.0));
}

TEST_CASE("anti-windup under six hours of saturation") {
    const auto f = load("lignocellulose");
    const PidGains g;
    digestor::SensorArray sensors(digestor::SensorModel::noiseless());
    auto st = digestor::initial_state(f.scenario, f.plant, 22.0);
    PidState s;
    for (int i = 0; i < 360; ++i) {
        // 80 degC is out of reach of the heater, so the output stays pinned.
        const auto out = pid_step(g, 80.0, st.temperature, 1.0, s);
        s = out.state;
        CHECK(out.heater_power == g.output_max);
        CHECK(std::abs(s.integral) <= g.integral_clamp);
        digestor::Actuators act;
        act.heater_power = out.heater_power;
        st = digestor::step_plant(st, f.scenario, f.plant, act, 1.0, sensors).state;
    }
}

TEST_CASE("closed-loop heat-up from ambient") {
    const auto f = load("lignocellulose");
    const PidGains g;
    digestor::SensorArray sensors(digestor::SensorModel::noiseless());
    auto st = digestor::initial_state(f.scenario, f.plant, 22.0);
    PidState s;
    double peak = 0.0;
    double worst_after_12h = 0.0;
    for (int minute = 0; minute < 24 * 60; ++minute) {
        const auto out = pid_step(g, 37.0, st.temperature, 1.0, s);
        s = out.state;
        digestor::Actuators act;
        act.heater_power = out.heater_power;
        act.stirrer_rpm = 100.0;
        st = digestor::step_plant(st, f.scenario, f.plant, act, 1.0, sensors).state;
        peak = std::max(peak, st.temperature);
        if (minute >= 12 * 60) worst_after_12h = std::max(worst_after_12h, std::abs(st.temperature - 37.0));
    }
    CHECK(worst_after_12h <= 0.5);
    CHECK(peak - 37.0 < 2.0);
}

TEST_CASE("pid batch holds the setpoint") {
    const auto f = load("lignocellulose");
    BatchSetup setup;
    setup.duration_days = 2.0;
    const auto run = run_pid_batch(f.scenario, f.plant, digestor::initial_state(f.scenario, f.plant, 37.0), {},
                                   setup, digestor::SensorModel::bench(2));
    REQUIRE(run.trajectory.size() == 2 * 96 + 1);
    for (const auto& s : run.trajectory) CHECK(std::abs(s.temperature - 37.0) < 0.5);

    setup.control_dt_min = 4.0;
    CHECK_THROWS_AS(run_pid_batch(f.scenario, f.plant, run.trajectory.front(), {}, setup,
                                  digestor::SensorModel::noiseless()),
                    InputError);
}

TEST_CASE("safety envelope") {
    SafetyEnvelope env;
    digestor::DigestorState st;
    st.temperature = 37.0;
    st.ph = 7.0;
    st.pressure = 3.0;
    digestor::Actuators act;
    act.heater_power = 42.0;
    act.stirrer_rpm = 90.0;

    auto ok = enforce_safety(st, env, act);
    CHECK(ok.actuators == act);
    CHECK(ok.events.empty());

    auto hi = st;
    hi.pressure = 14.5;
    auto vent = enforce_safety(hi, env, act);
    CHECK(vent.actuators.vent_open);
    REQUIRE(vent.events.size() == 1);
    CHECK(vent.events[0].channel == "pressure");
    CHECK(vent.events[0].action == SafetyAction::emergency_vent);

    auto cold = st;
    cold.temperature = 10.0;
    auto clamp = enforce_safety(cold, env, act);
    CHECK(clamp.actuators.heater_power == env.heater_max);
    CHECK(clamp.events.size() == 1);

    auto hot = st;
    hot.temperature = 50.0;
    CHECK(enforce_safety(hot, env, act).actuators.heater_power == env.heater_min);

    auto acid = st;
    acid.ph = 4.5;
    CHECK(enforce_safety(acid, env, act).actuators.ph_dosing);

    env.temperature.action = SafetyAction::halt;
    auto halted = enforce_safety(hot, env, act);
    CHECK(halted.halted);
    CHECK(halted.actuators.stirrer_rpm == 0.0);

    std::ostringstream csv;
    write_safety_csv(csv, vent.events);
    CHECK(csv.str().rfind("time,channel,action\n", 0) == 0);
    CHECK(csv.str().find(",pressure,emergency_vent") != std::string::npos);

    SafetyEnvelope bad;
    bad.ph.min = 9.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK_THROWS_AS(safety_action_from_string("panic"), ConfigError);
}

TEST_CASE("policy validation") {
    AdaptationPolicy p;
    SafetyEnvelope env;
    CHECK_NOTHROW(p.validate(env));
    p.refit_period_h = 0;
    CHECK_THROWS_AS(p.validate(env), ConfigError);
    p = {};
    p.setpoint_bounds.temperature = {10.0, 40.0};
    CHECK_THROWS_AS(p.validate(env), ConfigError);
    p = {};
    p.objective.pressure_target_kpa = 20.0;
    CHECK_THROWS_AS(p.validate(env), ConfigError);
    CHECK(objective_kind_from_string("track_pressure") == ObjectiveKind::track_pressure_target);
    CHECK(objective_kind_from_string("maximize_gas_rate") == ObjectiveKind::maximize_gas_rate);
    CHECK_THROWS_AS(objective_kind_from_string("minimize_cost"), ConfigError);
}

TEST_CASE("stabilization ratio") {
    std::vector<double> v(100, 1.0);
    for (int i = 0; i < 50; ++i) v[i] = (i % 2) ? 3.0 : 0.0;
    CHECK(stabilization_ratio(v) == 0.0);
    std::vector<double> saw;
    for (int i = 0; i < 100; ++i) saw.push_back(i % 2);
    CHECK(stabilization_ratio(saw) == doctest::Approx(0.5));
    CHECK_THROWS_AS(stabilization_ratio({1, 2}), MetricError);
}

TEST_CASE("campaign invariants") {
    auto in = small_campaign();
    const auto report = run_adaptive_campaign(in);
    const auto& b = in.policy.setpoint_bounds;

    REQUIRE(!report.cycles.empty());
    for (const auto& c : report.cycles) {
        CHECK(b.temperature.contains(c.applied.temperature));
        CHECK(b.rpm.contains(c.applied.rpm));
        CHECK(c.applied.temperature >= in.envelope.temperature.min);
        CHECK(c.applied.temperature <= in.envelope.temperature.max);
        if (!c.degraded) {
            REQUIRE(c.pso.has_value());
            REQUIRE(c.train_r2.has_value());
            for (std::size_t i = 1; i < c.pso->convergence_trace.size(); ++i) {
                CHECK(c.pso->convergence_trace[i].best_value <= c.pso->convergence_trace[i - 1].best_value);
            }
        }
    }
    for (const auto& [t, sp] : report.setpoint_log) {
        CHECK(b.temperature.contains(sp.temperature));
        CHECK(b.rpm.contains(sp.rpm));
    }
    CHECK(report.holdout.size() == 25);
    CHECK(report.final_holdout_r2.has_value());

    const auto j = to_json(report);
    CHECK(j.contains("cycles"));
    CHECK(j.at("cycles").at(0).contains("train_r2"));
    CHECK(j.contains("final_holdout_r2"));
}

TEST_CASE("campaign determinism") {
    const auto a = run_adaptive_campaign(small_campaign(3.0));
    const auto b = run_adaptive_campaign(small_campaign(3.0));
    CHECK(to_json(a).dump() == to_json(b).dump());
    CHECK(a.telemetry.records() == b.telemetry.records());
}

TEST_CASE("fit failure keeps the previous setpoints") {
    auto in = small_campaign();
    const std::size_t k = 2;
    in.inject_fit_failure = [k](std::size_t i) { return i == k; };
    const auto report = run_adaptive_campaign(in);
    REQUIRE(report.cycles.size() > k + 1);
    CHECK(report.cycles[k].degraded);
    CHECK(report.cycles[k].applied == report.cycles[k - 1].applied);
    CHECK(!report.cycles[k + 1].degraded);

    bool logged = false;
    for (const auto& e : report.events) logged = logged || (e.kind == "degraded_cycle" && e.detail.find("cycle 2") == 0);
    CHECK(logged);

    // No setpoint change between cycle k and cycle k+1.
    const double tk = in.initial.t * 1440.0 + report.cycles[k].t_h * 60.0;
    const double tk1 = in.initial.t * 1440.0 + report.cycles[k + 1].t_h * 60.0;
    for (const auto& [t, sp] : report.setpoint_log) CHECK(!(t >= tk && t < tk1));
}

TEST_CASE("collapsed bounds reduce to a plain PID run") {
    auto in = small_campaign(3.0);
    in.policy.setpoint_bounds.temperature = {36.0, 36.0};
    in.policy.setpoint_bounds.rpm = {80.0, 80.0};
    in.sensors = digestor::SensorModel::noiseless();
    const auto report = run_adaptive_campaign(in);
    for (const auto& c : report.cycles) CHECK(c.applied == Setpoint{36.0, 80.0});
    for (const auto& [t, sp] : report.setpoint_log) CHECK(sp == Setpoint{36.0, 80.0});

    BatchSetup setup;
    setup.setpoint = 36.0;
    setup.rpm = 80.0;
    setup.duration_days = 3.0;
    setup.record_dt_min = 1.0;
    const auto pid = run_pid_batch(in.scenario, in.plant, in.initial, in.gains, setup, in.sensors);
    const auto& a = report.final_state;
    const auto& b = pid.final_state();
    CHECK(a.temperature == doctest::Approx(b.temperature).epsilon(1e-6));
    CHECK(a.pressure == doctest::Approx(b.pressure).epsilon(1e-6));
    CHECK(a.gas_cumulative == doctest::Approx(b.gas_cumulative).epsilon(1e-6));
}
