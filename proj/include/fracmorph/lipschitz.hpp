#pragma once

#include <cmath>
#include <list>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "mesh.hpp"

namespace fracmorph {

struct EnclosingSphere {
    Vec3 center{Vec3::Zero()};
    double radius = 0;
};

/// Normal cone of a facet. `half_angle` is the largest angle between the
/// axis and any facet normal; the free double cone that stays outside the
/// surface has half-angle pi/2 - half_angle, and slope = tan(half_angle) is
/// its cotangent.
struct LipschitzCone {
    Vec3 axis{Vec3::UnitZ()};
    double half_angle = 0;
    double slope = 0;

    [[nodiscard]] double free_cone_half_angle() const noexcept { return std::numbers::pi / 2 - half_angle; }
};

namespace detail {

struct Ball {
    Vec3 c{Vec3::Zero()};
    double r2 = -1; // negative: contains nothing
};

/// Smallest sphere with every support point on its boundary (center in
/// their affine hull). Affinely dependent supports use the minimum-norm
/// solution, which is exact for co-spherical points.
inline Ball ball_through(const std::vector<Vec3>& s)
{
    Ball b;
    if (s.empty()) return b;
    const Vec3& p0 = s.front();
    b.c = p0;
    b.r2 = 0;
    const auto k = static_cast<Eigen::Index>(s.size()) - 1;
    if (k == 0) return b;
    Eigen::MatrixXd d(k, 3);
    Eigen::VectorXd rhs(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        d.row(i) = (s[static_cast<std::size_t>(i) + 1] - p0).transpose();
        rhs(i) = 0.5 * d.row(i).squaredNorm();
    }
    const Eigen::MatrixXd gram = d * d.transpose();
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(gram);
    cod.setThreshold(1e-12);
    const Eigen::VectorXd lambda = cod.solve(rhs);
    b.c = p0 + d.transpose() * lambda;
    for (const Vec3& p : s) b.r2 = std::max(b.r2, (p - b.c).squaredNorm());
    return b;
}

inline bool contains(const Ball& b, const Vec3& p)
{
    if (b.r2 < 0) return false;
    return (p - b.c).squaredNorm() <= b.r2 * (1 + 1e-12) + 1e-30;
}

inline void move_to_front(std::list<Vec3>& pts, std::list<Vec3>::iterator end, std::vector<Vec3>& support, Ball& ball)
{
    ball = ball_through(support);
    if (support.size() == 4) return;
    for (auto it = pts.begin(); it != end;) {
        auto cur = it++;
        if (contains(ball, *cur)) continue;
        support.push_back(*cur);
        move_to_front(pts, cur, support, ball);
        support.pop_back();
        pts.splice(pts.begin(), pts, cur);
    }
}

} // namespace detail

/// Exact minimum enclosing sphere by move-to-front recursion over at most
/// four support points. Input order is shuffled with a fixed seed, so the
/// result is deterministic. The returned radius is the exact maximum
/// distance from the center, so containment always holds.
[[nodiscard]] inline EnclosingSphere min_enclosing_sphere(const std::vector<Vec3>& points)
{
    if (points.empty()) throw std::invalid_argument("min_enclosing_sphere: empty point set");
    std::vector<Vec3> shuffled = points;
    std::mt19937_64 rng(0x5eed5eedULL);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    std::list<Vec3> pts(shuffled.begin(), shuffled.end());
    std::vector<Vec3> support;
    detail::Ball ball;
    detail::move_to_front(pts, pts.end(), support, ball);

    EnclosingSphere out{ball.c, 0};
    double r2 = 0;
    for (const Vec3& p : points) r2 = std::max(r2, (p - out.center).squaredNorm());
    out.radius = std::sqrt(r2);
    return out;
}

[[nodiscard]] inline double angle_between(const Vec3& a, const Vec3& b)
{
    return std::atan2(a.cross(b).norm(), a.dot(b));
}

/// Minimum bounding cone of unit normals: the axis is the direction of the
/// center of their minimum enclosing sphere (for points on the unit sphere
/// this maximises the smallest dot product), the half-angle the largest
/// angle to any normal.
[[nodiscard]] inline LipschitzCone fit_cone(const std::vector<Vec3>& normals)
{
    if (normals.empty()) throw std::invalid_argument("fit_cone: no normals");
    for (const Vec3& n : normals)
        if (std::abs(n.norm() - 1) > 1e-9) throw std::invalid_argument("fit_cone: normals must be unit vectors");

    const auto sphere = min_enclosing_sphere(normals);
    if (sphere.center.norm() < 1e-12)
        throw VisibilityError("normal set is not contained in any open hemisphere; the facet must be split");
    LipschitzCone cone;
    cone.axis = sphere.center.normalized();
    cone.half_angle = 0;
    for (const Vec3& n : normals) cone.half_angle = std::max(cone.half_angle, angle_between(cone.axis, n));
    if (cone.half_angle >= std::numbers::pi / 2)
        throw VisibilityError("normal cone half-angle " + std::to_string(cone.half_angle) +
                              " rad reaches pi/2; the facet is not a Monge patch over any direction");
    cone.slope = std::tan(cone.half_angle);
    return cone;
}

/// Minimal rotation (about axis x z) taking `axis` onto +z. The antiparallel
/// case rotates by pi about +x.
[[nodiscard]] inline Eigen::Matrix3d rotation_to_z(const Vec3& axis)
{
    const Vec3 a = axis.normalized();
    const Vec3 z = Vec3::UnitZ();
    const Vec3 k = a.cross(z);
    const double sin_t = k.norm();
    const double cos_t = a.dot(z);
    if (sin_t < 1e-15) {
        if (cos_t > 0) return Eigen::Matrix3d::Identity();
        return Eigen::AngleAxisd(std::numbers::pi, Vec3::UnitX()).toRotationMatrix();
    }
    return Eigen::AngleAxisd(std::atan2(sin_t, cos_t), k / sin_t).toRotationMatrix();
}

[[nodiscard]] inline TriangleMesh transformed(const TriangleMesh& mesh, const Eigen::Matrix3d& rot)
{
    TriangleMesh out = mesh;
    for (Vec3& v : out.vertices) v = rot * v;
    return out;
}

[[nodiscard]] inline TriangleMesh align_to_axis(const TriangleMesh& mesh, const LipschitzCone& cone)
{
    if (cone.axis.isApprox(Vec3::UnitZ(), 0.0)) return mesh;
    return transformed(mesh, rotation_to_z(cone.axis));
}

struct LipschitzCheck {
    bool holds = true;
    std::size_t first = 0;  ///< worst-violating pair (valid when !holds)
    std::size_t second = 0;
    double excess = 0;      ///< |dz| - s * dxy for that pair
    std::size_t sampled = 0;
};

inline constexpr std::size_t kLipschitzExhaustiveLimit = 20000;

/// Pairwise slope test over vertices of a +z aligned mesh. Meshes above
/// 20K vertices are subsampled with a fixed stride ceil(n / 20000).
[[nodiscard]] inline LipschitzCheck verify_lipschitz(const TriangleMesh& mesh, double slope)
{
    const std::size_t n = mesh.vertices.size();
    const std::size_t stride = n <= kLipschitzExhaustiveLimit ? 1 : (n + kLipschitzExhaustiveLimit - 1) / kLipschitzExhaustiveLimit;
    std::vector<Vec3> pts;
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < n; i += stride) {
        pts.push_back(mesh.vertices[i]);
        ids.push_back(i);
    }
    LipschitzCheck out;
    out.sampled = pts.size();
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            const double dx = pts[i].x() - pts[j].x();
            const double dy = pts[i].y() - pts[j].y();
            const double ex = std::abs(pts[i].z() - pts[j].z()) - slope * std::sqrt(dx * dx + dy * dy);
            if (ex > worst) {
                worst = ex;
                out.first = ids[i];
                out.second = ids[j];
            }
        }
    }
    out.excess = pts.size() < 2 ? 0 : worst;
    out.holds = out.excess <= 1e-9;
    return out;
}

} // namespace fracmorph
