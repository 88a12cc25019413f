#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "wastetwin/classifier.hpp"
#include "wastetwin/homography.hpp"
#include "wastetwin/kinematics.hpp"

namespace wastetwin::sorting {

/// Conveyor stream and cell timing.
struct StreamConfig {
    std::size_t objects = 1000;
    std::array<double, kClassCount> class_mix{0.25, 0.25, 0.25, 0.25};
    double arrival_rate_per_min = 6.0;
    double mass_median_g = 12.0;
    double mass_log_sigma = 0.5;
    // Fraction of food-waste wet mass that is volatile solids.
    double vs_fraction = 0.18;
    double pick_failure_prob = 0.02;
    double grip_time_s = 0.5;
    double release_time_s = 0.3;
    double pick_height_m = 0.03;
    double image_width_px = 640.0;
    double image_height_px = 480.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct CellLayout {
    Homography camera;
    // Drop point above each bin, metres in the arm base frame.
    std::array<Eigen::Vector3d, kClassCount> bins;
    kinematics::Joints home{};

    void validate() const;
    /// Camera looking at a trapezoidal patch in front of the arm; bins to the
    /// sides and rear.
    static CellLayout bench();
};

enum class Disposition { binned, undetected, below_threshold, pick_failed, unreachable };

std::string to_string(Disposition d);

struct SortReport {
    std::size_t objects = 0;
    std::size_t detected = 0;
    std::size_t accepted = 0;
    std::size_t binned = 0;
    std::size_t skipped = 0;
    std::size_t reattempts = 0;
    std::map<std::string, std::size_t> skip_reasons;
    double threshold = 0.0;

    // Over every detection (threshold 0) and over accepted detections.
    std::optional<AccuracyReport> accuracy_all;
    std::optional<AccuracyReport> accuracy_accepted;

    double duration_s = 0.0;
    double throughput_per_hour = 0.0;  // binned objects per hour

    std::int64_t mass_in_mg = 0;
    std::int64_t mass_binned_mg = 0;
    std::int64_t mass_skipped_mg = 0;
    std::array<std::int64_t, kClassCount> bin_mass_mg{};
    std::int64_t biodegradable_mg = 0;  // correctly binned food waste
    double biodegradable_vs_g = 0.0;
};

/// Runs the cell object by object: classify, threshold, map to the table,
/// solve IK, pick (one reattempt on failure) and place. Objects that are not
/// picked pass through unsorted. Kinematic failures skip the object.
SortReport run_sortline(const StreamConfig& stream, const ClassifierModel& classifier, double threshold,
                        const CellLayout& layout, const kinematics::ArmModel& arm);

nlohmann::json to_json(const SortReport& report);

/// Scenario fragment handed to the digester: vs_loaded from the report.
nlohmann::json biodegradable_fragment(const SortReport& report);

StreamConfig stream_from_json(const nlohmann::json& j, StreamConfig base = {});

}  // namespace wastetwin::sorting
