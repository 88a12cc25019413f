#include "wastetwin/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "wastetwin/error.hpp"

namespace wastetwin::kinematics {

using Eigen::Matrix3d;
using Eigen::Matrix4d;
using Eigen::Vector3d;

void ArmModel::validate() const {
    for (std::size_t i = 0; i < kJoints; ++i) {
        const auto& r = dh[i];
        if (!std::isfinite(r.a) || !std::isfinite(r.alpha) || !std::isfinite(r.d) ||
            !std::isfinite(r.theta_offset)) {
            throw ConfigError("arm: non-finite DH parameter on joint " + std::to_string(i + 1));
        }
        if (!(limits[i].min < limits[i].max)) {
            throw ConfigError("arm: joint " + std::to_string(i + 1) + " limits require min < max");
        }
    }
    if (!(max_joint_speed > 0.0)) throw ConfigError("arm: max_joint_speed must be > 0");
}

double ArmModel::reach() const {
    double r = 0.0;
    for (const auto& row : dh) r += std::abs(row.a) + std::abs(row.d);
    return r;
}

bool ArmModel::within_limits(const Joints& q) const {
    for (std::size_t i = 0; i < kJoints; ++i) {
        if (!(q[i] >= limits[i].min && q[i] <= limits[i].max)) return false;
    }
    return true;
}

ArmModel ArmModel::small_arm() {
    constexpr double half_pi = std::numbers::pi / 2.0;
    ArmModel arm;
    arm.dh = {{
        {0.0, half_pi, 0.13156, 0.0},
        {-0.1104, 0.0, 0.0, -half_pi},
        {-0.096, 0.0, 0.0, 0.0},
        {0.0, half_pi, 0.06639, -half_pi},
        {0.0, -half_pi, 0.07318, half_pi},
        {0.0, 0.0, 0.0436, 0.0},
    }};
    constexpr double j = 165.0 * std::numbers::pi / 180.0;
    constexpr double j6 = 175.0 * std::numbers::pi / 180.0;
    arm.limits = {{{-j, j}, {-j, j}, {-j, j}, {-j, j}, {-j, j}, {-j6, j6}}};
    arm.max_joint_speed = 2.0;
    return arm;
}

namespace {

Matrix4d dh_transform(const DhRow& r, double q) {
    const double th = q + r.theta_offset;
    const double ct = std::cos(th), st = std::sin(th);
    const double ca = std::cos(r.alpha), sa = std::sin(r.alpha);
    Matrix4d t;
    t << ct, -st * ca, st * sa, r.a * ct,
         st, ct * ca, -ct * sa, r.a * st,
         0, sa, ca, r.d,
         0, 0, 0, 1;
    return t;
}

/// Frames 0..6 (base through flange).
std::array<Matrix4d, kJoints + 1> chain(const ArmModel& arm, const Joints& q) {
    std::array<Matrix4d, kJoints + 1> frames;
    frames[0] = Matrix4d::Identity();
    for (std::size_t i = 0; i < kJoints; ++i) frames[i + 1] = frames[i] * dh_transform(arm.dh[i], q[i]);
    return frames;
}

/// Rotation vector taking `from` onto `to` (expressed in the base frame).
Vector3d rotation_error(const Matrix3d& to, const Matrix3d& from) {
    const Eigen::AngleAxisd aa(Matrix3d(to * from.transpose()));
    return aa.axis() * aa.angle();
}

}  // namespace

Pose forward_kinematics(const ArmModel& arm, const Joints& q) {
    for (std::size_t i = 0; i < kJoints; ++i) {
        if (!(q[i] >= arm.limits[i].min && q[i] <= arm.limits[i].max)) {
            throw LimitError("fk: joint " + std::to_string(i + 1) + " outside its limits");
        }
    }
    const auto frames = chain(arm, q);
    Pose p;
    p.position = frames.back().block<3, 1>(0, 3);
    p.rotation = frames.back().block<3, 3>(0, 0);
    return p;
}

IkResult inverse_kinematics(const ArmModel& arm, const Pose& target, const Joints& seed,
                            const IkOptions& opt) {
    if (!target.position.allFinite() || !target.rotation.allFinite()) {
        throw InputError("ik: non-finite target");
    }
    if (target.position.norm() > arm.reach()) {
        throw ReachabilityError("ik: target is outside the reach sphere");
    }
    Joints q = seed;
    for (std::size_t i = 0; i < kJoints; ++i) q[i] = std::clamp(q[i], arm.limits[i].min, arm.limits[i].max);

    struct Eval {
        std::array<Matrix4d, kJoints + 1> frames;
        Eigen::Matrix<double, 6, 1> e;
        double pos_err = 0.0, rot_err = 0.0;
    };
    auto evaluate = [&](const Joints& x) {
        Eval ev{chain(arm, x), {}, 0.0, 0.0};
        ev.e.head<3>() = target.position - ev.frames.back().block<3, 1>(0, 3);
        ev.e.tail<3>() = rotation_error(target.rotation, ev.frames.back().block<3, 3>(0, 0));
        ev.pos_err = ev.e.head<3>().norm();
        ev.rot_err = ev.e.tail<3>().norm();
        return ev;
    };

    // Damping starts at options.damping and adapts: shrinks after a step
    // that reduces the error, grows after one that does not (the step is
    // then rejected). Near singular targets a fixed damping stalls.
    double lambda = opt.damping;
    Eval cur = evaluate(q);
    double best = cur.pos_err;
    for (std::size_t it = 0;; ++it) {
        if (cur.pos_err < opt.position_tolerance && cur.rot_err < opt.orientation_tolerance) {
            return {q, it, cur.pos_err, cur.rot_err};
        }
        if (it == opt.max_iterations) {
            throw ConvergenceError("ik: no convergence within " + std::to_string(opt.max_iterations) +
                                       " iterations",
                                   best);
        }

        const Vector3d pe = cur.frames.back().block<3, 1>(0, 3);
        Eigen::Matrix<double, 6, 6> jac;
        for (std::size_t i = 0; i < kJoints; ++i) {
            const Vector3d z = cur.frames[i].block<3, 1>(0, 2);
            const Vector3d o = cur.frames[i].block<3, 1>(0, 3);
            jac.block<3, 1>(0, static_cast<Eigen::Index>(i)) = z.cross(pe - o);
            jac.block<3, 1>(3, static_cast<Eigen::Index>(i)) = z;
        }
        // Joints resting on a limit and pushed further out are frozen and the
        // step is recomputed with the rest.
        Eigen::Matrix<double, 6, 1> dq;
        for (int pass = 0; pass < static_cast<int>(kJoints); ++pass) {
            const Eigen::Matrix<double, 6, 6> jjt =
                jac * jac.transpose() + lambda * lambda * Eigen::Matrix<double, 6, 6>::Identity();
            dq = jac.transpose() * jjt.ldlt().solve(cur.e);
            bool frozen = false;
            for (std::size_t i = 0; i < kJoints; ++i) {
                const auto c = static_cast<Eigen::Index>(i);
                const bool at_min = q[i] <= arm.limits[i].min && dq(c) < 0.0;
                const bool at_max = q[i] >= arm.limits[i].max && dq(c) > 0.0;
                if (at_min || at_max) {
                    jac.col(c).setZero();
                    frozen = true;
                }
            }
            if (!frozen) break;
        }
        Joints next = q;
        for (std::size_t i = 0; i < kJoints; ++i) {
            next[i] = std::clamp(q[i] + dq(static_cast<Eigen::Index>(i)), arm.limits[i].min, arm.limits[i].max);
        }
        Eval trial = evaluate(next);
        if (trial.e.squaredNorm() < cur.e.squaredNorm()) {
            q = next;
            cur = std::move(trial);
            best = std::min(best, cur.pos_err);
            lambda = std::max(lambda * 0.5, 1e-9);
        } else if (lambda < 1e3) {
            lambda = std::min(lambda * 4.0, 1e3);
        } else {
            // Stalled against the limits: pull limit-bound joints inward and
            // start damping afresh.
            bool moved = false;
            for (std::size_t i = 0; i < kJoints; ++i) {
                const double nudge = 0.05 * (arm.limits[i].max - arm.limits[i].min);
                if (q[i] <= arm.limits[i].min) q[i] += nudge, moved = true;
                else if (q[i] >= arm.limits[i].max) q[i] -= nudge, moved = true;
            }
            if (moved) cur = evaluate(q);
            lambda = opt.damping;
        }
    }
}

nlohmann::json to_json(const ArmModel& arm) {
    nlohmann::json dh = nlohmann::json::array();
    nlohmann::json limits = nlohmann::json::array();
    for (std::size_t i = 0; i < kJoints; ++i) {
        const auto& r = arm.dh[i];
        dh.push_back({{"a", r.a}, {"alpha", r.alpha}, {"d", r.d}, {"theta_offset", r.theta_offset}});
        limits.push_back({arm.limits[i].min, arm.limits[i].max});
    }
    return {{"dh", dh}, {"joint_limits", limits}, {"max_joint_speed", arm.max_joint_speed}};
}

ArmModel arm_from_json(const nlohmann::json& j, ArmModel base) {
    try {
        if (j.contains("dh")) {
            const auto& dh = j.at("dh");
            if (!dh.is_array() || dh.size() != kJoints) throw ConfigError("arm: dh needs six rows");
            for (std::size_t i = 0; i < kJoints; ++i) {
                const auto& r = dh.at(i);
                base.dh[i] = {r.at("a").get<double>(), r.at("alpha").get<double>(), r.at("d").get<double>(),
                              r.value("theta_offset", 0.0)};
            }
        }
        if (j.contains("joint_limits")) {
            const auto& lim = j.at("joint_limits");
            if (!lim.is_array() || lim.size() != kJoints) throw ConfigError("arm: joint_limits needs six pairs");
            for (std::size_t i = 0; i < kJoints; ++i) {
                const auto pair = lim.at(i).get<std::array<double, 2>>();
                base.limits[i] = {pair[0], pair[1]};
            }
        }
        if (j.contains("max_joint_speed")) base.max_joint_speed = j.at("max_joint_speed").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("arm: ") + e.what());
    }
    base.validate();
    return base;
}

}  // namespace wastetwin::kinematics
