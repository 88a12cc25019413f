#include "wastetwin/homography.hpp"

#include <cmath>
#include <vector>

#include "wastetwin/error.hpp"

namespace wastetwin::sorting {

namespace {

// Similarity that moves the centroid to the origin and the mean distance
// from it to sqrt(2).
Eigen::Matrix3d normalizer(const std::vector<Eigen::Vector2d>& pts) {
    Eigen::Vector2d c = Eigen::Vector2d::Zero();
    for (const auto& p : pts) c += p;
    c /= static_cast<double>(pts.size());
    double mean_dist = 0.0;
    for (const auto& p : pts) mean_dist += (p - c).norm();
    mean_dist /= static_cast<double>(pts.size());
    if (!(mean_dist > 0.0)) throw DegeneracyError("homography: coincident points");
    const double s = std::sqrt(2.0) / mean_dist;
    Eigen::Matrix3d t;
    t << s, 0, -s * c.x(), 0, s, -s * c.y(), 0, 0, 1;
    return t;
}

Eigen::Vector2d apply(const Eigen::Matrix3d& t, const Eigen::Vector2d& p) {
    const Eigen::Vector3d q = t * p.homogeneous();
    return q.hnormalized();
}

// Twice the triangle area over the squared longest side; zero when collinear.
double collinearity(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
    const Eigen::Vector2d ab = b - a, ac = c - a, bc = c - b;
    const double area2 = std::abs(ab.x() * ac.y() - ab.y() * ac.x());
    const double longest = std::max({ab.squaredNorm(), ac.squaredNorm(), bc.squaredNorm()});
    return longest > 0.0 ? area2 / longest : 0.0;
}

void check_minimal_set(const std::vector<Eigen::Vector2d>& pts, const char* which) {
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j)
            for (std::size_t k = j + 1; k < pts.size(); ++k)
                if (collinearity(pts[i], pts[j], pts[k]) < 1e-9) {
                    throw DegeneracyError(std::string("homography: three collinear ") + which + " points");
                }
}

}  // namespace

void Homography::validate() const {
    if (!m.allFinite()) throw DegeneracyError("homography: non-finite matrix");
    if (m(2, 2) != 1.0) throw DegeneracyError("homography: matrix must be scaled so m(2,2) = 1");
    const double scale = m.norm();
    if (std::abs(m.determinant()) <= 1e-12 * scale * scale * scale) {
        throw DegeneracyError("homography: matrix is singular");
    }
}

Homography fit_homography(std::span<const Correspondence> cs) {
    if (cs.size() < 4) throw InputError("homography: need at least 4 correspondences");
    std::vector<Eigen::Vector2d> px, wd;
    for (const auto& c : cs) {
        if (!c.pixel.allFinite() || !c.world.allFinite()) throw InputError("homography: non-finite point");
        px.push_back(c.pixel);
        wd.push_back(c.world);
    }
    if (cs.size() == 4) {
        check_minimal_set(px, "pixel");
        check_minimal_set(wd, "world");
    }
    const Eigen::Matrix3d tp = normalizer(px);
    const Eigen::Matrix3d tw = normalizer(wd);

    Eigen::MatrixXd a(2 * cs.size(), 9);
    for (std::size_t i = 0; i < cs.size(); ++i) {
        const Eigen::Vector2d p = apply(tp, px[i]);
        const Eigen::Vector2d w = apply(tw, wd[i]);
        const auto r = static_cast<Eigen::Index>(2 * i);
        a.row(r) << -p.x(), -p.y(), -1, 0, 0, 0, w.x() * p.x(), w.x() * p.y(), w.x();
        a.row(r + 1) << 0, 0, 0, -p.x(), -p.y(), -1, w.y() * p.x(), w.y() * p.y(), w.y();
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    // A well-posed problem has a one-dimensional null space: the eighth
    // singular value must stay clear of zero.
    if (sv(7) <= 1e-10 * sv(0)) throw DegeneracyError("homography: degenerate point configuration");

    const Eigen::VectorXd hv = svd.matrixV().col(8);
    Eigen::Matrix3d hn;
    hn << hv(0), hv(1), hv(2), hv(3), hv(4), hv(5), hv(6), hv(7), hv(8);
    Eigen::Matrix3d h = tw.inverse() * hn * tp;
    if (std::abs(h(2, 2)) < 1e-12 * h.norm()) {
        throw DegeneracyError("homography: origin maps to the line at infinity");
    }
    h /= h(2, 2);
    h(2, 2) = 1.0;

    Homography out;
    out.m = h;
    out.validate();
    double ss = 0.0;
    for (std::size_t i = 0; i < cs.size(); ++i) ss += (pixel_to_world(out, px[i]) - wd[i]).squaredNorm();
    out.reprojection_rms = std::sqrt(ss / static_cast<double>(cs.size()));
    return out;
}

Eigen::Vector2d pixel_to_world(const Homography& h, const Eigen::Vector2d& pixel) {
    const Eigen::Vector3d q = h.m * pixel.homogeneous();
    if (std::abs(q.z()) < 1e-12) throw HorizonError("homography: point maps to infinity");
    return q.hnormalized();
}

Eigen::Vector2d world_to_pixel(const Homography& h, const Eigen::Vector2d& world) {
    const Eigen::Vector3d q = h.m.inverse() * world.homogeneous();
    if (std::abs(q.z()) < 1e-12) throw HorizonError("homography: point maps to infinity");
    return q.hnormalized();
}

nlohmann::json to_json(const Homography& h) {
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < 3; ++r) rows.push_back({h.m(r, 0), h.m(r, 1), h.m(r, 2)});
    return {{"matrix", rows}, {"reprojection_rms", h.reprojection_rms}};
}

Homography homography_from_json(const nlohmann::json& j) {
    Homography h;
    try {
        const auto& rows = j.at("matrix");
        if (!rows.is_array() || rows.size() != 3) throw ConfigError("homography: matrix must be 3x3");
        for (int r = 0; r < 3; ++r) {
            const auto& row = rows.at(static_cast<std::size_t>(r));
            if (!row.is_array() || row.size() != 3) throw ConfigError("homography: matrix must be 3x3");
            for (int c = 0; c < 3; ++c) h.m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
        }
        h.reprojection_rms = j.value("reprojection_rms", 0.0);
        if (h.m(2, 2) != 0.0 && std::isfinite(h.m(2, 2))) {
            h.m /= h.m(2, 2);
            h.m(2, 2) = 1.0;
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("homography: ") + e.what());
    }
    try {
        h.validate();
    } catch (const DegeneracyError& e) {
        throw ConfigError(e.what());
    }
    return h;
}

}  // namespace wastetwin::sorting
