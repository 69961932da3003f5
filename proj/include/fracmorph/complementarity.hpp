#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "edt.hpp"
#include "morphology.hpp"
#include "voxel_grid.hpp"

namespace fracmorph {

/// Eq. (1)/(2) violations of a fragment pair inside a mask.
struct ComplementarityReport {
    double rho = 0;
    std::string pair;                  ///< which operators were compared, e.g. "close(X)|open(Y)"
    std::int64_t overlap_count = 0;    ///< |X n Y n M|
    std::int64_t gap_count = 0;        ///< |M \ (X u Y)|
    std::int64_t eroded_mask_size = 0; ///< |M| actually tested
    double max_penetration = 0;        ///< mm, over overlap voxels, into the counterpart
    bool empty_mask = false;           ///< the eroded mask vanished at this scale

    [[nodiscard]] bool complementary() const noexcept { return !empty_mask && overlap_count == 0 && gap_count == 0; }
};

/// Depth of the deepest overlap voxel inside `other`, measured as its
/// distance to the nearest voxel outside `other`.
[[nodiscard]] inline double max_penetration(const VoxelGrid& overlap, const VoxelGrid& other)
{
    if (overlap.empty()) return 0;
    const auto field = edt(other, Feature::empty, {.exterior_is_feature = true}).field;
    std::uint32_t worst = 0;
    const auto n = overlap.size();
    for (std::int64_t f = 0; f < n; ++f)
        if (overlap.get(f)) worst = std::max(worst, field.d2[std::size_t(f)]);
    return std::sqrt(double(worst)) * overlap.spacing();
}

[[nodiscard]] inline ComplementarityReport compare_within(const VoxelGrid& x, const VoxelGrid& y, const VoxelGrid& mask,
                                                          double rho, std::string pair)
{
    x.require_same_geometry(y);
    x.require_same_geometry(mask);
    ComplementarityReport r;
    r.rho = rho;
    r.pair = std::move(pair);
    r.eroded_mask_size = mask.count();
    r.empty_mask = r.eroded_mask_size == 0;
    const auto overlap = x & y & mask;
    r.overlap_count = overlap.count();
    r.gap_count = (mask - (x | y)).count();
    // penetration of X's overlap voxels into Y; symmetric by construction
    r.max_penetration = max_penetration(overlap, y);
    return r;
}

[[nodiscard]] inline ComplementarityReport check_exact(const VoxelGrid& x, const VoxelGrid& y, const VoxelGrid& mask)
{
    return compare_within(x, y, mask, 0, "X|Y");
}

struct ScaleCheck {
    ComplementarityReport a; ///< close(X) against open(Y)
    ComplementarityReport b; ///< open(X) against close(Y)
};

/// Both Eq. (3) pairings at scale rho, tested inside the doubly eroded mask
/// eps_{2 rho}(M). The mask erosion treats the outside of the grid as
/// background, so M never needs padding of its own.
[[nodiscard]] inline ScaleCheck check_at_scale(const VoxelGrid& x, const VoxelGrid& y, const VoxelGrid& mask, double rho,
                                               const MorphOptions& opt = {})
{
    x.require_same_geometry(y);
    x.require_same_geometry(mask);
    const auto inner = erode(mask, 2 * rho, {.exterior = Exterior::background, .check_padding = false});
    return {compare_within(close(x, rho, opt), open(y, rho, opt), inner, rho, "close(X)|open(Y)"),
            compare_within(open(x, rho, opt), close(y, rho, opt), inner, rho, "open(X)|close(Y)")};
}

/// Wear model: an opening of size alpha.
[[nodiscard]] inline VoxelGrid abrade(const VoxelGrid& x, double alpha, const MorphOptions& opt = {})
{
    return open(x, alpha, opt);
}

struct AbrasionBound {
    double exact = 0;  ///< alpha * (sqrt(1 + s^2) - 1)
    double approx = 0; ///< alpha * s^2 / 2
};

[[nodiscard]] inline AbrasionBound abrasion_bound(double alpha, double slope)
{
    if (alpha < 0 || slope < 0) throw std::invalid_argument("abrasion_bound: negative input");
    return {alpha * (std::sqrt(1 + slope * slope) - 1), 0.5 * alpha * slope * slope};
}

/// Whether the digital ball of radius rho is alpha-open, i.e. a union of
/// translates of the alpha ball. Only then do openings of scale rho ignore a
/// prior alpha-opening exactly.
[[nodiscard]] inline bool ball_absorbs(double alpha, double rho, double g)
{
    const auto r2 = squared_radius_voxels(rho, g);
    const auto r = static_cast<std::int64_t>(std::floor(std::sqrt(double(r2)))) + 1;
    GridGeometry geom;
    geom.spacing = g;
    geom.dims = {2 * r + 3, 2 * r + 3, 2 * r + 3};
    VoxelGrid ball(geom);
    const std::int64_t c = r + 1;
    for (const auto& v : digital_ball(rho, g)) ball.set(c + v.x, c + v.y, c + v.z);
    if (ball.size() <= brute::kMaxVoxels) return brute::apply(ball, alpha, brute::Op::open) == ball;
    return open(ball, alpha) == ball;
}

// ---------------------------------------------------------------------------
// Misalignment

/// Rigid pose mapping Y's world frame into X's: p_x = rotation * p_y + translation.
struct Pose {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Vec3 translation = Vec3::Zero();
};

struct ResampleResult {
    VoxelGrid grid;
    double coverage = 0; ///< fraction of Y's occupied voxels landing inside the target grid
};

/// Nearest-voxel pull-back of `y` onto `target` under `pose`.
[[nodiscard]] inline ResampleResult resample(const VoxelGrid& y, const GridGeometry& target, const Pose& pose)
{
    ResampleResult out{VoxelGrid(target), 0};
    const Eigen::Matrix3d inv = pose.rotation.transpose();
    const auto& sg = y.geometry();
    const auto [nx, ny, nz] = target.dims;
    for (std::int64_t k = 0; k < nz; ++k)
        for (std::int64_t j = 0; j < ny; ++j)
            for (std::int64_t i = 0; i < nx; ++i) {
                const Vec3 p = inv * (target.world({i, j, k}) - pose.translation);
                const auto s = sg.nearest_index(p);
                if (sg.in_range(s.x, s.y, s.z) && y.get(s.x, s.y, s.z)) out.grid.set(i, j, k);
            }
    // coverage: forward-map Y's voxels and count those inside the target
    std::int64_t inside = 0, total = 0;
    for (std::int64_t f = 0; f < y.size(); ++f) {
        if (!y.get(f)) continue;
        ++total;
        const auto t = target.nearest_index(pose.rotation * sg.world(sg.unflat(f)) + pose.translation);
        inside += target.in_range(t.x, t.y, t.z);
    }
    out.coverage = total ? double(inside) / double(total) : 0;
    return out;
}

struct MisalignmentScore {
    double rho = 0;
    double score = 0; ///< (overlap + gap over both pairings) / (2 |eps_{2 rho}(M)|)
    /// Same violations per (x, y) column of the eroded mask. The volume
    /// normaliser shrinks with the mask's thickness while the crack area does
    /// not, so this is the one to compare across scales.
    double per_column = 0;
    std::int64_t eroded_mask_size = 0;
    std::int64_t eroded_mask_columns = 0;
    double coverage = 0;
    bool empty_mask = false;
};

namespace detail {

inline std::int64_t occupied_columns(const VoxelGrid& grid)
{
    const auto [nx, ny, nz] = grid.dims();
    std::vector<char> hit(std::size_t(nx * ny), 0);
    for (std::int64_t k = 0; k < nz; ++k)
        for (std::int64_t j = 0; j < ny; ++j)
            for (std::int64_t i = 0; i < nx; ++i)
                if (grid.get(i, j, k)) hit[std::size_t(i + nx * j)] = 1;
    return std::count(hit.begin(), hit.end(), 1);
}

} // namespace detail

/// Per-scale violation density of the pair after moving Y by `pose`. Zero
/// at the exact pose of an exactly complementary pair.
[[nodiscard]] inline std::vector<MisalignmentScore> misalignment_score(const VoxelGrid& x, const VoxelGrid& y, const Pose& pose,
                                                                       const VoxelGrid& mask, const ScaleLadder& ladder,
                                                                       const MorphOptions& opt = {})
{
    x.require_same_geometry(mask);
    const auto moved = resample(y, x.geometry(), pose);
    std::vector<MisalignmentScore> out;
    for (double rho : ladder.scales()) {
        MisalignmentScore m;
        m.rho = rho;
        m.coverage = moved.coverage;
        if (moved.coverage == 0) {
            out.push_back(m);
            continue;
        }
        const auto r = check_at_scale(x, moved.grid, mask, rho, opt);
        m.eroded_mask_size = r.a.eroded_mask_size;
        m.eroded_mask_columns = detail::occupied_columns(erode(mask, 2 * rho, {.check_padding = false}));
        m.empty_mask = r.a.empty_mask;
        if (!m.empty_mask) {
            const auto violations = double(r.a.overlap_count + r.a.gap_count + r.b.overlap_count + r.b.gap_count);
            m.score = violations / (2.0 * double(m.eroded_mask_size));
            m.per_column = violations / (2.0 * double(m.eroded_mask_columns));
        }
        out.push_back(m);
    }
    return out;
}

} // namespace fracmorph
