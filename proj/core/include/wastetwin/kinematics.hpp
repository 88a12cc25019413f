#pragma once

#include <array>

#include <Eigen/Dense>
#include <json.hpp>

namespace wastetwin::kinematics {

inline constexpr std::size_t kJoints = 6;
using Joints = std::array<double, kJoints>;

/// Standard Denavit-Hartenberg row: Rz(theta) Tz(d) Tx(a) Rx(alpha).
struct DhRow {
    double a = 0.0;      // m
    double alpha = 0.0;  // rad
    double d = 0.0;      // m
    double theta_offset = 0.0;  // rad
};

struct JointLimit {
    double min = -3.0;
    double max = 3.0;
};

struct ArmModel {
    std::array<DhRow, kJoints> dh{};
    std::array<JointLimit, kJoints> limits{};
    double max_joint_speed = 2.0;  // rad/s

    void validate() const;
    /// sum(|a_i| + |d_i|): no pose beyond this distance from the base is reachable.
    double reach() const;
    bool within_limits(const Joints& q) const;

    /// Synthetic 6R desktop arm with MyCobot-280-like proportions. The DH
    /// values are plausible, not measured from hardware.
    static ArmModel small_arm();
};

struct Pose {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
};

/// Throws LimitError when a joint is outside its limits.
Pose forward_kinematics(const ArmModel& arm, const Joints& q);

struct IkOptions {
    double damping = 0.05;
    double position_tolerance = 1e-6;     // m
    double orientation_tolerance = 1e-4;  // rad
    std::size_t max_iterations = 500;
};

struct IkResult {
    Joints joints{};
    std::size_t iterations = 0;
    double position_error = 0.0;
    double orientation_error = 0.0;
};

/// Damped least squares from `seed`, projecting onto the joint limits after
/// every update. Throws ReachabilityError when the target lies outside
/// reach() and ConvergenceError (carrying the best position residual) when
/// the iteration cap is hit.
IkResult inverse_kinematics(const ArmModel& arm, const Pose& target, const Joints& seed,
                            const IkOptions& options = {});

nlohmann::json to_json(const ArmModel& arm);
ArmModel arm_from_json(const nlohmann::json& j, ArmModel base = ArmModel::small_arm());

}  // namespace wastetwin::kinematics
