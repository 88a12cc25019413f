#include "wastetwin/sortline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "wastetwin/error.hpp"

namespace wastetwin::sorting {

using kinematics::Joints;
using kinematics::Pose;

void StreamConfig::validate() const {
    double sum = 0.0;
    for (double p : class_mix) {
        if (!(p >= 0.0)) throw ConfigError("stream: class_mix entries must be >= 0");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("stream: class_mix must sum to 1");
    if (!(arrival_rate_per_min > 0.0)) throw ConfigError("stream: arrival_rate_per_min must be > 0");
    if (!(mass_median_g > 0.0) || !(mass_log_sigma >= 0.0)) {
        throw ConfigError("stream: mass_median_g must be > 0 and mass_log_sigma >= 0");
    }
    if (!(vs_fraction >= 0.0 && vs_fraction <= 1.0)) throw ConfigError("stream: vs_fraction must be in [0, 1]");
    if (!(pick_failure_prob >= 0.0 && pick_failure_prob <= 1.0)) {
        throw ConfigError("stream: pick_failure_prob must be in [0, 1]");
    }
    if (!(grip_time_s >= 0.0 && release_time_s >= 0.0)) throw ConfigError("stream: grip/release times must be >= 0");
    if (!(image_width_px > 0.0 && image_height_px > 0.0)) throw ConfigError("stream: image size must be > 0");
}

void CellLayout::validate() const {
    try {
        camera.validate();
    } catch (const DegeneracyError& e) {
        throw ConfigError(std::string("cell: ") + e.what());
    }
    for (const auto& b : bins) {
        if (!b.allFinite()) throw ConfigError("cell: non-finite bin position");
    }
}

CellLayout CellLayout::bench() {
    CellLayout c;
    const std::array<Correspondence, 4> corners{{
        {{0.0, 0.0}, {0.24, 0.10}},
        {{640.0, 0.0}, {0.24, -0.10}},
        {{640.0, 480.0}, {0.14, -0.08}},
        {{0.0, 480.0}, {0.14, 0.08}},
    }};
    c.camera = fit_homography(corners);
    c.camera.reprojection_rms = 0.0;
    c.bins = {{
        {0.02, 0.20, 0.08},   // food_waste
        {0.02, -0.20, 0.08},  // metal
        {-0.10, 0.16, 0.08},  // paper
        {-0.10, -0.16, 0.08}, // plastic
    }};
    c.home = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    return c;
}

std::string to_string(Disposition d) {
    switch (d) {
        case Disposition::binned: return "binned";
        case Disposition::undetected: return "undetected";
        case Disposition::below_threshold: return "below_threshold";
        case Disposition::pick_failed: return "pick_failed";
        case Disposition::unreachable: return "unreachable";
    }
    return "unknown";
}

namespace {

// Gripper pointing straight down, yawed towards the point.
Pose downward_pose(const Eigen::Vector3d& p) {
    Pose pose;
    pose.position = p;
    const double yaw = std::atan2(p.y(), p.x());
    pose.rotation = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix() *
                    Eigen::AngleAxisd(std::numbers::pi, Eigen::Vector3d::UnitX()).toRotationMatrix();
    return pose;
}

double travel_time(const Joints& from, const Joints& to, double speed) {
    double m = 0.0;
    for (std::size_t i = 0; i < from.size(); ++i) m = std::max(m, std::abs(to[i] - from[i]));
    return m / speed;
}

/// Solves the downward pose at `p`, trying a short list of seeds.
std::optional<Joints> solve(const kinematics::ArmModel& arm, const Eigen::Vector3d& p,
                            std::span<const Joints> seeds) {
    const Pose target = downward_pose(p);
    for (const auto& s : seeds) {
        try {
            return kinematics::inverse_kinematics(arm, target, s).joints;
        } catch (const ConvergenceError&) {
        } catch (const ReachabilityError&) {
            return std::nullopt;
        }
    }
    return std::nullopt;
}

}  // namespace

SortReport run_sortline(const StreamConfig& stream, const ClassifierModel& classifier_model,
                        double threshold, const CellLayout& layout, const kinematics::ArmModel& arm) {
    stream.validate();
    classifier_model.validate();
    layout.validate();
    arm.validate();
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("sortline: threshold must be in [0, 1]");

    // A hover posture over the middle of the image seeds every pick solve.
    const std::array<Joints, 4> base_seeds{{
        {0.0, -0.6, -1.2, 0.2, 0.0, 0.0},
        {0.0, 0.6, 1.2, -0.2, 0.0, 0.0},
        {0.0, -1.0, -0.8, 0.3, 0.0, 0.0},
        {0.0, 0.3, 0.6, 1.0, 0.0, 0.0},
    }};
    const Eigen::Vector2d centre_px(stream.image_width_px / 2.0, stream.image_height_px / 2.0);
    const Eigen::Vector2d centre = pixel_to_world(layout.camera, centre_px);
    const auto hover = solve(arm, {centre.x(), centre.y(), stream.pick_height_m}, base_seeds);
    if (!hover) throw ConfigError("sortline: the arm cannot reach the middle of the camera view");

    std::array<Joints, kClassCount> bin_joints;
    for (std::size_t c = 0; c < kClassCount; ++c) {
        std::vector<Joints> seeds{*hover};
        seeds.insert(seeds.end(), base_seeds.begin(), base_seeds.end());
        const auto q = solve(arm, layout.bins[c], seeds);
        if (!q) throw ConfigError("sortline: bin '" + to_string(kAllClasses[c]) + "' is not reachable");
        bin_joints[c] = *q;
    }

    std::mt19937_64 stream_rng(stream.seed);
    std::mt19937_64 pick_rng(stream.seed ^ 0x9e3779b97f4a7c15ULL);
    std::exponential_distribution<double> gap(stream.arrival_rate_per_min / 60.0);
    std::discrete_distribution<std::size_t> class_pick(stream.class_mix.begin(), stream.class_mix.end());
    std::lognormal_distribution<double> mass(std::log(stream.mass_median_g), stream.mass_log_sigma);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Classifier classifier(classifier_model);

    SortReport r;
    r.objects = stream.objects;
    r.threshold = threshold;
    std::vector<Outcome> all, accepted;

    Joints arm_q = layout.home;
    double clock = 0.0;    // arm free at
    double arrival = 0.0;

    auto skip = [&](Disposition d, std::int64_t mg) {
        ++r.skipped;
        ++r.skip_reasons[to_string(d)];
        r.mass_skipped_mg += mg;
    };

    for (std::size_t i = 0; i < stream.objects; ++i) {
        arrival += gap(stream_rng);
        const WasteClass truth = kAllClasses[class_pick(stream_rng)];
        const auto mg = std::max<std::int64_t>(1, std::llround(mass(stream_rng) * 1000.0));
        const Pixel px{unit(stream_rng) * stream.image_width_px, unit(stream_rng) * stream.image_height_px};
        r.mass_in_mg += mg;

        const Detection det = classifier.classify(truth, threshold, px);
        if (!det.predicted_class) {
            skip(Disposition::undetected, mg);
            continue;
        }
        ++r.detected;
        all.emplace_back(truth, *det.predicted_class);
        if (!det.accepted) {
            skip(Disposition::below_threshold, mg);
            continue;
        }
        ++r.accepted;
        accepted.emplace_back(truth, *det.predicted_class);

        std::optional<Joints> pick_q;
        try {
            const Eigen::Vector2d w = pixel_to_world(layout.camera, {px.u, px.v});
            pick_q = solve(arm, {w.x(), w.y(), stream.pick_height_m}, std::span<const Joints>(&*hover, 1));
        } catch (const HorizonError&) {
        }
        if (!pick_q) {
            skip(Disposition::unreachable, mg);
            continue;
        }

        clock = std::max(clock, arrival) + travel_time(arm_q, *pick_q, arm.max_joint_speed);
        arm_q = *pick_q;
        bool gripped = false;
        for (int attempt = 0; attempt < 2 && !gripped; ++attempt) {
            if (attempt == 1) ++r.reattempts;
            clock += stream.grip_time_s;
            gripped = unit(pick_rng) >= stream.pick_failure_prob;
        }
        if (!gripped) {
            skip(Disposition::pick_failed, mg);
            continue;
        }
        const auto bin = index(*det.predicted_class);
        clock += travel_time(arm_q, bin_joints[bin], arm.max_joint_speed) + stream.release_time_s;
        arm_q = bin_joints[bin];

        ++r.binned;
        r.mass_binned_mg += mg;
        r.bin_mass_mg[bin] += mg;
        if (truth == WasteClass::food_waste && *det.predicted_class == WasteClass::food_waste) {
            r.biodegradable_mg += mg;
        }
    }

    if (!all.empty()) r.accuracy_all = accuracy(all);
    if (!accepted.empty()) r.accuracy_accepted = accuracy(accepted);
    r.duration_s = std::max(clock, arrival);
    r.throughput_per_hour = r.duration_s > 0.0 ? static_cast<double>(r.binned) * 3600.0 / r.duration_s : 0.0;
    r.biodegradable_vs_g = static_cast<double>(r.biodegradable_mg) / 1000.0 * stream.vs_fraction;
    return r;
}

nlohmann::json to_json(const SortReport& r) {
    using nlohmann::json;
    json bins = json::object();
    for (auto c : kAllClasses) bins[to_string(c)] = r.bin_mass_mg[index(c)];
    return {
        {"objects", r.objects},
        {"detected", r.detected},
        {"accepted", r.accepted},
        {"binned", r.binned},
        {"skipped", r.skipped},
        {"reattempts", r.reattempts},
        {"skip_reasons", r.skip_reasons},
        {"threshold", r.threshold},
        {"accuracy", r.accuracy_all ? json(r.accuracy_all->overall) : json(nullptr)},
        {"accuracy_at_threshold", r.accuracy_accepted ? json(r.accuracy_accepted->overall) : json(nullptr)},
        {"metrics_all_detections", r.accuracy_all ? to_json(*r.accuracy_all) : json(nullptr)},
        {"metrics_accepted", r.accuracy_accepted ? to_json(*r.accuracy_accepted) : json(nullptr)},
        {"duration_s", r.duration_s},
        {"throughput_per_hour", r.throughput_per_hour},
        {"mass_in_mg", r.mass_in_mg},
        {"mass_binned_mg", r.mass_binned_mg},
        {"mass_skipped_mg", r.mass_skipped_mg},
        {"bin_mass_mg", bins},
        {"biodegradable_mg", r.biodegradable_mg},
        {"biodegradable_vs_g", r.biodegradable_vs_g},
    };
}

nlohmann::json biodegradable_fragment(const SortReport& r) {
    return {{"name", "sortline_output"},
            {"vs_loaded", r.biodegradable_vs_g},
            {"biodegradable_mass_g", static_cast<double>(r.biodegradable_mg) / 1000.0}};
}

StreamConfig stream_from_json(const nlohmann::json& j, StreamConfig s) {
    try {
        if (j.contains("objects")) s.objects = j.at("objects").get<std::size_t>();
        if (j.contains("class_mix")) {
            const auto& m = j.at("class_mix");
            if (m.is_object()) {
                s.class_mix.fill(0.0);
                for (const auto& [name, v] : m.items()) {
                    const auto c = waste_class_from_string(name);
                    if (!c) throw ConfigError("stream: unknown class '" + name + "' in class_mix");
                    s.class_mix[index(*c)] = v.get<double>();
                }
            } else {
                s.class_mix = m.get<std::array<double, kClassCount>>();
            }
        }
        s.arrival_rate_per_min = j.value("arrival_rate_per_min", s.arrival_rate_per_min);
        s.mass_median_g = j.value("mass_median_g", s.mass_median_g);
        s.mass_log_sigma = j.value("mass_log_sigma", s.mass_log_sigma);
        s.vs_fraction = j.value("vs_fraction", s.vs_fraction);
        s.pick_failure_prob = j.value("pick_failure_prob", s.pick_failure_prob);
        s.grip_time_s = j.value("grip_time_s", s.grip_time_s);
        s.release_time_s = j.value("release_time_s", s.release_time_s);
        s.pick_height_m = j.value("pick_height_m", s.pick_height_m);
        s.image_width_px = j.value("image_width_px", s.image_width_px);
        s.image_height_px = j.value("image_height_px", s.image_height_px);
        s.seed = j.value("seed", s.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("stream: ") + e.what());
    }
    s.validate();
    return s;
}

}  // namespace wastetwin::sorting
