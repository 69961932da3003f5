#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "edt.hpp"

namespace fracmorph {

/// What a set is assumed to contain outside its finite grid. Solids embedded
/// in padded grids use `background`; the complement of such a set has a
/// `foreground` exterior.
enum class Exterior { background, foreground };

[[nodiscard]] constexpr Exterior flipped(Exterior e) noexcept
{
    return e == Exterior::background ? Exterior::foreground : Exterior::background;
}

struct MorphOptions {
    Exterior exterior = Exterior::background;
    /// Reject a dilation whose result reaches the outermost voxel layer.
    bool check_padding = true;
};

/// Digital ball {v : |v|^2 <= floor((rho/g)^2)} as integer offsets.
[[nodiscard]] inline std::vector<Index3> digital_ball(double rho, double g)
{
    const std::int64_t t = squared_radius_voxels(rho, g);
    std::int64_t r = 0;
    while ((r + 1) * (r + 1) <= t) ++r;
    std::vector<Index3> ball;
    for (std::int64_t z = -r; z <= r; ++z)
        for (std::int64_t y = -r; y <= r; ++y)
            for (std::int64_t x = -r; x <= r; ++x)
                if (x * x + y * y + z * z <= t) ball.push_back({x, y, z});
    return ball;
}

namespace detail {

inline void check_front(const VoxelGrid& result, double rho, const MorphOptions& opt)
{
    if (opt.check_padding && opt.exterior == Exterior::background && result.touches_boundary())
        throw PaddingError("dilation by " + std::to_string(rho) + " mm reaches the grid boundary; increase padding");
}

} // namespace detail

/// Dilation threshold from a precomputed field of the occupied voxels.
[[nodiscard]] inline VoxelGrid dilate_from_field(const DistanceField& occupied_field, double rho, const MorphOptions& opt = {})
{
    VoxelGrid out = level_set(occupied_field, rho, Sense::within);
    detail::check_front(out, rho, opt);
    return out;
}

/// Erosion threshold from a precomputed field of the empty voxels.
[[nodiscard]] inline VoxelGrid erode_from_field(const DistanceField& empty_field, double rho)
{
    return level_set(empty_field, rho, Sense::beyond);
}

[[nodiscard]] inline DistanceField occupied_field(const VoxelGrid& x, Exterior ext)
{
    return edt(x, Feature::occupied, {.provenance = false, .exterior_is_feature = ext == Exterior::foreground}).field;
}

[[nodiscard]] inline DistanceField empty_field(const VoxelGrid& x, Exterior ext)
{
    return edt(x, Feature::empty, {.provenance = false, .exterior_is_feature = ext == Exterior::background}).field;
}

/// Ball dilation: voxels within rho of an occupied voxel.
[[nodiscard]] inline VoxelGrid dilate(const VoxelGrid& x, double rho, const MorphOptions& opt = {})
{
    if (rho < 0) throw std::invalid_argument("dilate: negative radius");
    if (squared_radius_voxels(rho, x.spacing()) == 0) {
        detail::check_front(x, rho, opt);
        return x;
    }
    return dilate_from_field(occupied_field(x, opt.exterior), rho, opt);
}

/// Ball erosion, computed directly as {v : d2 to the nearest empty voxel > (rho/g)^2}.
[[nodiscard]] inline VoxelGrid erode(const VoxelGrid& x, double rho, const MorphOptions& opt = {})
{
    if (rho < 0) throw std::invalid_argument("erode: negative radius");
    if (squared_radius_voxels(rho, x.spacing()) == 0) return x;
    return erode_from_field(empty_field(x, opt.exterior), rho);
}

[[nodiscard]] inline VoxelGrid close(const VoxelGrid& x, double rho, const MorphOptions& opt = {})
{
    return erode(dilate(x, rho, opt), rho, opt);
}

[[nodiscard]] inline VoxelGrid open(const VoxelGrid& x, double rho, const MorphOptions& opt = {})
{
    return dilate(erode(x, rho, opt), rho, opt);
}

// ---------------------------------------------------------------------------
// Scale spaces

class ScaleLadder {
public:
    ScaleLadder() = default;
    explicit ScaleLadder(std::vector<double> scales) : scales_(std::move(scales))
    {
        if (scales_.empty()) throw ConfigError("scale ladder is empty");
        for (std::size_t i = 0; i < scales_.size(); ++i) {
            if (!(scales_[i] >= 0)) throw ConfigError("scales must be non-negative");
            if (i > 0 && !(scales_[i] > scales_[i - 1])) throw ConfigError("scales must be strictly increasing");
        }
    }
    [[nodiscard]] const std::vector<double>& scales() const noexcept { return scales_; }
    [[nodiscard]] double max() const { return scales_.back(); }
    [[nodiscard]] std::size_t size() const noexcept { return scales_.size(); }

private:
    std::vector<double> scales_;
};

struct ScaleLevel {
    double rho = 0;
    VoxelGrid closed;
    std::optional<VoxelGrid> opened;
};

/// Voxels breaking the scale ordering between two consecutive ladder steps:
/// closed_excess = |phi_lo \ phi_hi|, opened_excess = |gamma_hi \ gamma_lo|.
/// Digital balls are not always unions of smaller digital balls (the
/// 33-voxel ball of radius 2 is not a union of 7-voxel balls of radius 1), so
/// these can be non-zero even though continuous closings are ordered.
struct OrderingViolation {
    double rho_lo = 0, rho_hi = 0;
    std::int64_t closed_excess = 0;
    std::int64_t opened_excess = 0;
};

struct ScaleSpace {
    VoxelGrid source;
    std::vector<ScaleLevel> levels;
    /// Nearest-source-voxel map from the shared dilation transform.
    std::optional<ProvenanceMap> source_provenance;
    std::vector<OrderingViolation> ordering_violations;
};

struct ScaleSpaceOptions {
    /// Also compute volumetric openings. Not needed for extruded facets,
    /// whose bottom copy already yields the opening through the closing.
    bool openings = false;
    bool provenance = false;
};

/// Closing (and optionally opening) at every scale. The transform of the
/// source is computed once and shared by all scales; each closing then
/// needs one more transform of its dilated background.
[[nodiscard]] inline ScaleSpace scale_space(const VoxelGrid& x, const ScaleLadder& ladder, const ScaleSpaceOptions& opt = {})
{
    ScaleSpace ss;
    ss.source = x;
    const MorphOptions mopt{};
    auto src = edt(x, Feature::occupied, {.provenance = opt.provenance});
    std::optional<DistanceField> bg;
    if (opt.openings) bg = empty_field(x, Exterior::background);

    for (double rho : ladder.scales()) {
        ScaleLevel level;
        level.rho = rho;
        if (squared_radius_voxels(rho, x.spacing()) == 0) {
            detail::check_front(x, rho, mopt);
            level.closed = x;
            if (opt.openings) level.opened = x;
        }
        else {
            level.closed = erode(dilate_from_field(src.field, rho, mopt), rho, mopt);
            if (opt.openings) level.opened = dilate(erode_from_field(*bg, rho), rho, mopt);
        }
        ss.levels.push_back(std::move(level));
    }
    ss.source_provenance = std::move(src.provenance);

    for (std::size_t i = 0; i < ss.levels.size(); ++i) {
        const auto& lv = ss.levels[i];
        if (!x.is_subset_of(lv.closed)) throw std::logic_error("closing is not extensive");
        if (lv.opened && !lv.opened->is_subset_of(x)) throw std::logic_error("opening is not anti-extensive");
        if (i == 0) continue;
        const auto& prev = ss.levels[i - 1];
        OrderingViolation v{prev.rho, lv.rho, (prev.closed - lv.closed).count(), 0};
        if (lv.opened) v.opened_excess = (*lv.opened - *prev.opened).count();
        if (v.closed_excess || v.opened_excess) ss.ordering_violations.push_back(v);
    }
    return ss;
}

// ---------------------------------------------------------------------------
// Direct set-definition evaluation, used as a test oracle.

namespace brute {

enum class Op { dilate, erode, close, open };

inline constexpr std::int64_t kMaxVoxels = 32 * 32 * 32;

[[nodiscard]] inline VoxelGrid dilate(const VoxelGrid& x, double rho, Exterior ext = Exterior::background)
{
    if (x.size() > kMaxVoxels) throw std::invalid_argument("brute morphology: grid larger than 32^3");
    const auto ball = digital_ball(rho, x.spacing());
    const bool outside = ext == Exterior::foreground;
    VoxelGrid out(x.geometry());
    const auto [nx, ny, nz] = x.dims();
    for (std::int64_t z = 0; z < nz; ++z)
        for (std::int64_t y = 0; y < ny; ++y)
            for (std::int64_t xx = 0; xx < nx; ++xx)
                for (const auto& b : ball)
                    if (x.get_or(xx - b.x, y - b.y, z - b.z, outside)) {
                        out.set(xx, y, z);
                        break;
                    }
    return out;
}

[[nodiscard]] inline VoxelGrid erode(const VoxelGrid& x, double rho, Exterior ext = Exterior::background)
{
    if (x.size() > kMaxVoxels) throw std::invalid_argument("brute morphology: grid larger than 32^3");
    const auto ball = digital_ball(rho, x.spacing());
    const bool outside = ext == Exterior::foreground;
    VoxelGrid out(x.geometry());
    const auto [nx, ny, nz] = x.dims();
    for (std::int64_t z = 0; z < nz; ++z)
        for (std::int64_t y = 0; y < ny; ++y)
            for (std::int64_t xx = 0; xx < nx; ++xx) {
                bool fits = true;
                for (const auto& b : ball)
                    if (!x.get_or(xx + b.x, y + b.y, z + b.z, outside)) {
                        fits = false;
                        break;
                    }
                out.set(xx, y, z, fits);
            }
    return out;
}

[[nodiscard]] inline VoxelGrid apply(const VoxelGrid& x, double rho, Op op, Exterior ext = Exterior::background)
{
    switch (op) {
    case Op::dilate: return dilate(x, rho, ext);
    case Op::erode: return erode(x, rho, ext);
    case Op::close: return erode(dilate(x, rho, ext), rho, ext);
    case Op::open: return dilate(erode(x, rho, ext), rho, ext);
    }
    throw std::invalid_argument("unknown op");
}

} // namespace brute

} // namespace fracmorph
