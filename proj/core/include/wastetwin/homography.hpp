#pragma once

#include <span>

#include <Eigen/Dense>
#include <json.hpp>

namespace wastetwin::sorting {

struct Correspondence {
    Eigen::Vector2d pixel;
    Eigen::Vector2d world;  // metres on the table plane
};

/// Pixel -> table-plane map, scaled so that m(2,2) == 1.
struct Homography {
    Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
    double reprojection_rms = 0.0;  // metres, from the fit

    /// Throws DegeneracyError unless m is finite, m(2,2) == 1 and the
    /// determinant is bounded away from zero relative to scale.
    void validate() const;
};

/// Normalized DLT. Throws InputError with fewer than 4 correspondences and
/// DegeneracyError for collinear or coincident configurations.
Homography fit_homography(std::span<const Correspondence> correspondences);

/// Projective map with perspective divide; HorizonError when the
/// homogeneous scale is below 1e-12.
Eigen::Vector2d pixel_to_world(const Homography& h, const Eigen::Vector2d& pixel);
Eigen::Vector2d world_to_pixel(const Homography& h, const Eigen::Vector2d& world);

nlohmann::json to_json(const Homography& h);
Homography homography_from_json(const nlohmann::json& j);

}  // namespace wastetwin::sorting
