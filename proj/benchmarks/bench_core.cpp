#include <benchmark/benchmark.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "wastetwin/digestor.hpp"
#include "wastetwin/error.hpp"
#include "wastetwin/kinematics.hpp"
#include "wastetwin/pso.hpp"
#include "wastetwin/sortline.hpp"
#include "wastetwin/surrogate.hpp"

using namespace wastetwin;

static void BM_PsoSphere(benchmark::State& state) {
    pso::PsoConfig c;
    c.bounds.assign(static_cast<std::size_t>(state.range(0)), {-5.0, 5.0});
    c.max_iterations = 300;
    for (auto _ : state) {
        const auto r = pso::optimize(c, [](std::span<const double> x) {
            double s = 0.0;
            for (double v : x) s += v * v;
            return s;
        });
        benchmark::DoNotOptimize(r.best_value);
    }
}
BENCHMARK(BM_PsoSphere)->Arg(2)->Arg(10);

static void BM_SurrogateFit(benchmark::State& state) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    surrogate::Dataset d;
    for (int i = 0; i < state.range(0); ++i) {
        const double a = 32 + 8 * u(rng), b = 40 + 120 * u(rng), c = 6.8 + 0.4 * u(rng);
        d.add({a, b, c}, 0.1 * a - 0.002 * a * a + 0.001 * b + c);
    }
    for (auto _ : state) {
        auto m = surrogate::fit(d, surrogate::FeatureMap::quadratic_with_interactions);
        benchmark::DoNotOptimize(m.train_r2());
    }
}
BENCHMARK(BM_SurrogateFit)->Arg(48)->Arg(500);

static void BM_StepPlant(benchmark::State& state) {
    const auto f = digestor::load_scenario_file(std::string(WASTETWIN_DATA_DIR) + "/scenarios/food_waste.json");
    digestor::SensorArray sensors(digestor::SensorModel::bench(1));
    auto st = digestor::initial_state(f.scenario, f.plant, 37.0);
    digestor::Actuators act;
    act.heater_power = 50.0;
    act.stirrer_rpm = 100.0;
    for (auto _ : state) {
        st = digestor::step_plant(st, f.scenario, f.plant, act, 1.0, sensors).state;
        benchmark::DoNotOptimize(st.gas_cumulative);
    }
}
BENCHMARK(BM_StepPlant);

static void BM_InverseKinematics(benchmark::State& state) {
    const auto arm = kinematics::ArmModel::small_arm();
    std::mt19937_64 rng(2);
    std::normal_distribution<double> jitter(0.0, 0.1);
    std::size_t failures = 0;
    for (auto _ : state) {
        state.PauseTiming();
        kinematics::Joints q, seed;
        for (std::size_t j = 0; j < kinematics::kJoints; ++j) {
            q[j] = std::uniform_real_distribution<double>(arm.limits[j].min, arm.limits[j].max)(rng);
            seed[j] = std::clamp(q[j] + jitter(rng), arm.limits[j].min, arm.limits[j].max);
        }
        const auto target = kinematics::forward_kinematics(arm, q);
        state.ResumeTiming();
        try {
            benchmark::DoNotOptimize(kinematics::inverse_kinematics(arm, target, seed).iterations);
        } catch (const ConvergenceError&) {
            ++failures;
        }
    }
    state.counters["failures"] = static_cast<double>(failures);
}
BENCHMARK(BM_InverseKinematics);

static void BM_Sortline(benchmark::State& state) {
    sorting::StreamConfig s;
    s.objects = static_cast<std::size_t>(state.range(0));
    const auto model = sorting::ClassifierModel::uniform_confusion(0.98);
    const auto layout = sorting::CellLayout::bench();
    const auto arm = kinematics::ArmModel::small_arm();
    for (auto _ : state) {
        benchmark::DoNotOptimize(sorting::run_sortline(s, model, 0.5, layout, arm).binned);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Sortline)->Arg(1000);
BENCHMARK_MAIN();
