// Acceptance run: one PASS/FAIL line per criterion with its runtime.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "wastetwin/classifier.hpp"
#include "wastetwin/error.hpp"
#include "wastetwin/homography.hpp"
#include "wastetwin/kinematics.hpp"
#include "wastetwin/pso.hpp"
#include "wastetwin/surrogate.hpp"
#include "wastetwin/telemetry.hpp"

using namespace wastetwin;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kDefault = fs::path(WASTETWIN_DATA_DIR) / "config" / "default.json";
const fs::path kWork = fs::temp_directory_path() / "wastetwin_acceptance";

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string name;
    double time_limit_s;  // 0: none
    std::function<Outcome()> check;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

fs::path run_cli(cli::Command cmd, const std::string& name, cli::Overrides ov) {
    const auto dir = kWork / name;
    fs::remove_all(dir);
    ov.out = dir;
    std::ostringstream err;
    if (cli::execute(cmd, kDefault, ov, err) != cli::kExitOk) throw std::runtime_error(err.str());
    return dir;
}

std::vector<double> daily_yield(const fs::path& csv) {
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);
    std::vector<double> out;
    while (std::getline(in, line)) out.push_back(std::stod(line.substr(line.find(',') + 1)));
    return out;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Outcome sorting_accuracy() {
    cli::Overrides ov;
    ov.objects = 10000;
    const auto rep = read_json(run_cli(cli::Command::sortline, "sortline", ov) / "sortline" / "sort_report.json");
    const double acc = rep.at("accuracy").get<double>();
    return {acc >= 0.97 && acc <= 0.99, "accuracy " + fmt("%.4f", acc) + " over " +
                                            std::to_string(rep.at("detected").get<int>()) + " detections"};
}

Outcome lignocellulose_yield() {
    cli::Overrides ov;
    ov.days = 10.0;
    ov.scenario = "lignocellulose";
    const auto daily = daily_yield(run_cli(cli::Command::digest, "lignocellulose", ov) / "digest" / "daily_yield.csv");
    double total = 0.0;
    for (double d : daily) total += d;
    const auto peak = std::max_element(daily.begin(), daily.end()) - daily.begin() + 1;
    const bool ok = std::abs(total - 11.1) <= 0.05 * 11.1 && peak >= 5 && peak <= 7 && daily.size() == 10;
    return {ok, "total " + fmt("%.3f", total) + " L, peak day " + std::to_string(peak)};
}

Outcome food_waste_shape() {
    cli::Overrides ov;
    ov.days = 17.0;
    ov.scenario = "food_waste";
    const auto daily = daily_yield(run_cli(cli::Command::digest, "food_waste", ov) / "digest" / "daily_yield.csv");
    const auto peak = static_cast<std::size_t>(std::max_element(daily.begin(), daily.end()) - daily.begin());
    std::size_t dip = peak;
    while (dip + 1 < daily.size() && daily[dip + 1] < daily[dip]) ++dip;
    double rise = 0.0;
    for (std::size_t i = dip + 1; i < daily.size(); ++i) rise = std::max(rise, daily[i]);
    const bool ok = daily.size() == 17 && peak + 1 >= 5 && peak + 1 <= 8 && dip > peak && dip + 1 < daily.size() &&
                    rise > daily[dip];
    return {ok, "peak day " + std::to_string(peak + 1) + ", dip day " + std::to_string(dip + 1) + " (" +
                    fmt("%.3f", daily[dip]) + " L), recovery to " + fmt("%.3f", rise) + " L"};
}

// Criteria 4 and 5 share one default campaign run.
json campaign_summary() {
    static const json summary = [] {
        const auto dir = run_cli(cli::Command::optimize, "optimize", {});
        json s = read_json(dir / "optimize" / "campaign.json");
        s["pressure"] = json::array();
        std::ifstream in(dir / "optimize" / "pressure_trace.csv");
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) s["pressure"].push_back(std::stod(line.substr(line.find(',') + 1)));
        s["pso_traces"] = json::array();
        for (const auto& e : fs::directory_iterator(dir / "optimize")) {
            if (e.path().filename().string().rfind("pso_trace_cycle_", 0) != 0) continue;
            std::ifstream t(e.path());
            std::getline(t, line);
            json values = json::array();
            while (std::getline(t, line)) values.push_back(std::stod(line.substr(line.find(',') + 1)));
            s["pso_traces"].push_back(values);
        }
        return s;
    }();
    return summary;
}

Outcome surrogate_fidelity() {
    const auto s = campaign_summary();
    if (s.at("final_holdout_r2").is_null()) return {false, "held-out R2 undefined"};
    const double r2 = s.at("final_holdout_r2").get<double>();
    return {r2 >= 0.90, "held-out R2 " + fmt("%.4f", r2) + " on " + std::to_string(s.at("holdout").size()) +
                            " grid points"};
}

Outcome pressure_stabilization() {
    const auto s = campaign_summary();
    const auto p = s.at("pressure").get<std::vector<double>>();
    const double ratio = control::stabilization_ratio(p);
    std::size_t stable_traces = 0, traces = 0;
    for (const auto& t : s.at("pso_traces")) {
        const auto v = t.get<std::vector<double>>();
        if (v.size() < 5) continue;
        ++traces;
        if (control::stabilization_ratio(v) < 0.1) ++stable_traces;
    }
    return {ratio < 0.1, "time-domain ratio " + fmt("%.4f", ratio) + "; PSO traces stable " +
                             std::to_string(stable_traces) + "/" + std::to_string(traces)};
}

Outcome optimizer_benchmarks() {
    std::vector<double> sphere, rosen;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        pso::PsoConfig c;
        c.bounds.assign(10, {-5.0, 5.0});
        c.max_iterations = 300;
        c.seed = seed;
        sphere.push_back(pso::optimize(c, [](std::span<const double> x) {
                             double s = 0.0;
                             for (double v : x) s += v * v;
                             return s;
                         }).best_value);
        pso::PsoConfig r;
        r.bounds.assign(2, {-2.0, 2.0});
        r.swarm_size = 40;
        r.max_iterations = 500;
        r.seed = seed;
        const auto res = pso::optimize(r, [](std::span<const double> x) {
            return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
        });
        rosen.push_back(std::hypot(res.best_position[0] - 1.0, res.best_position[1] - 1.0));
    }
    const double ms = median(sphere), mr = median(rosen);
    return {ms < 1e-4 && mr < 0.05, "sphere10D median " + fmt("%.3g", ms) + ", rosenbrock median distance " +
                                        fmt("%.3g", mr)};
}

Outcome kinematics_oracle() {
    const auto arm = kinematics::ArmModel::small_arm();
    std::mt19937_64 rng(1);
    double worst = 0.0;
    std::size_t violations = 0, failures = 0;
    for (int k = 0; k < 1000; ++k) {
        kinematics::Joints q, seed;
        for (std::size_t j = 0; j < kinematics::kJoints; ++j) {
            q[j] = std::uniform_real_distribution<double>(arm.limits[j].min, arm.limits[j].max)(rng);
            seed[j] = std::clamp(q[j] + std::normal_distribution<double>(0.0, 0.1)(rng), arm.limits[j].min,
                                 arm.limits[j].max);
        }
        const auto target = kinematics::forward_kinematics(arm, q);
        try {
            const auto r = kinematics::inverse_kinematics(arm, target, seed);
            if (!arm.within_limits(r.joints)) {
                ++violations;
                continue;
            }
            worst = std::max(worst, (kinematics::forward_kinematics(arm, r.joints).position - target.position).norm());
        } catch (const Error&) {
            ++failures;
        }
    }
    return {worst < 1e-6 && violations == 0 && failures == 0,
            "max residual " + fmt("%.3g", worst) + " m, limit violations " + std::to_string(violations) +
                ", failures " + std::to_string(failures)};
}

Outcome homography_oracle() {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1.0, 1.0), px(0.0, 640.0);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        Eigen::Matrix3d h;
        h << 1e-3 * (1.0 + 0.3 * u(rng)), 1e-4 * u(rng), 0.2 * u(rng), 1e-4 * u(rng), 1e-3 * (1.0 + 0.3 * u(rng)),
            0.2 * u(rng), 2e-4 * u(rng), 2e-4 * u(rng), 1.0;
        std::vector<sorting::Correspondence> cs;
        for (int i = 0; i < 8; ++i) {
            const Eigen::Vector2d p(px(rng), 0.75 * px(rng));
            cs.push_back({p, (h * p.homogeneous()).hnormalized()});
        }
        const auto fit = sorting::fit_homography(cs);
        for (const auto& c : cs) worst = std::max(worst, (sorting::pixel_to_world(fit, c.pixel) - c.world).norm());
    }
    return {worst < 1e-9, "max reprojection error " + fmt("%.3g", worst) + " m"};
}

Outcome metric_identities() {
    const std::vector<double> y{3.1, -0.4, 2.2, 7.9, 5.0, 0.3};
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    const double same = surrogate::r2_score(y, y);
    const double flat = surrogate::r2_score(y, std::vector<double>(y.size(), mean));

    using sorting::WasteClass;
    const std::vector<sorting::Outcome> o{{WasteClass::food_waste, WasteClass::food_waste},
                                          {WasteClass::food_waste, WasteClass::metal},
                                          {WasteClass::metal, WasteClass::metal},
                                          {WasteClass::metal, WasteClass::metal}};
    const auto rep = sorting::accuracy(o);
    const auto& a = rep.per_class[sorting::index(WasteClass::food_waste)];
    const bool counts = a.tp == 1 && a.fn == 1 && a.fp == 0 && a.tn == 2 && a.accuracy() == 0.75;
    const bool ok = std::abs(same - 1.0) <= 1e-12 && std::abs(flat) <= 1e-12 && rep.overall == 0.75 && counts;
    return {ok, "r2(y,y)=" + fmt("%.17g", same) + ", r2(y,mean)=" + fmt("%.3g", flat) + ", example accuracy " +
                    fmt("%.2f", rep.overall)};
}

Outcome determinism() {
    cli::Overrides ov;
    ov.days = 4.0;
    const auto a = run_cli(cli::Command::pipeline, "pipeline_a", ov);
    const auto b = run_cli(cli::Command::pipeline, "pipeline_b", ov);
    std::size_t files = 0, differing = 0;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (!e.is_regular_file()) continue;
        ++files;
        const auto other = b / fs::relative(e.path(), a);
        if (!fs::exists(other) || slurp(e.path()) != slurp(other)) ++differing;
    }
    std::size_t b_files = 0;
    for (const auto& e : fs::recursive_directory_iterator(b)) b_files += e.is_regular_file() ? 1 : 0;

    const auto csv = a / "optimize" / "telemetry.csv";
    const auto store = telemetry::import_csv(csv);
    const auto copy = kWork / "roundtrip.csv";
    telemetry::export_csv(store, copy);
    const auto back = telemetry::import_csv(copy);
    const bool exact = back.records() == store.records() && slurp(copy) == slurp(csv);

    return {differing == 0 && files == b_files && files > 0 && exact,
            std::to_string(files) + " files, " + std::to_string(differing) + " differ; " +
                std::to_string(store.size()) + " telemetry records round-trip " + (exact ? "exact" : "inexact")};
}

}  // namespace

int main() {
    fs::create_directories(kWork);
    const std::vector<Criterion> criteria{
        {1, "sorting accuracy", 5.0, sorting_accuracy},
        {2, "lignocellulose yield", 10.0, lignocellulose_yield},
        {3, "food-waste shape", 0.0, food_waste_shape},
        {4, "surrogate fidelity", 60.0, surrogate_fidelity},
        {5, "pressure stabilization", 0.0, pressure_stabilization},
        {6, "optimizer benchmarks", 5.0, optimizer_benchmarks},
        {7, "kinematics oracle", 5.0, kinematics_oracle},
        {8, "homography oracle", 0.0, homography_oracle},
        {9, "metric identities", 0.0, metric_identities},
        {10, "determinism and persistence", 0.0, determinism},
    };

    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.time_limit_s > 0.0 && secs >= c.time_limit_s) {
            o.pass = false;
            o.detail += "; over the " + fmt("%.0f", c.time_limit_s) + " s limit";
        }
        if (!o.pass) ++failed;
        std::printf("[%s] %2d %-28s %8.3f s  %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name.c_str(), secs,
                    o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
