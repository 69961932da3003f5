#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "edt.hpp"
#include "mesh.hpp"
#include "voxel_grid.hpp"

namespace fracmorph {

enum class SurfaceKind { closing, opening };

[[nodiscard]] inline const char* to_string(SurfaceKind k) noexcept { return k == SurfaceKind::closing ? "closing" : "opening"; }

/// Height per (x, y) column of a voxel grid, on the grid's own xy lattice.
struct HeightField {
    std::int64_t nx = 0, ny = 0;
    double ox = 0, oy = 0; ///< center of column (0, 0)
    double g = 1;
    SurfaceKind kind = SurfaceKind::closing;
    double rho = 0;
    std::vector<std::optional<double>> z;

    [[nodiscard]] std::size_t index(std::int64_t i, std::int64_t j) const noexcept { return std::size_t(i + nx * j); }
    [[nodiscard]] const std::optional<double>& at(std::int64_t i, std::int64_t j) const noexcept { return z[index(i, j)]; }
    [[nodiscard]] double x(std::int64_t i) const noexcept { return ox + g * double(i); }
    [[nodiscard]] double y(std::int64_t j) const noexcept { return oy + g * double(j); }
    [[nodiscard]] std::size_t defined() const noexcept
    {
        std::size_t n = 0;
        for (const auto& v : z) n += v.has_value();
        return n;
    }
    [[nodiscard]] bool same_layout(const HeightField& o) const noexcept
    {
        return nx == o.nx && ny == o.ny && ox == o.ox && oy == o.oy && g == o.g;
    }
};

[[nodiscard]] inline HeightField empty_heightfield(const GridGeometry& geom, SurfaceKind kind, double rho)
{
    HeightField hf;
    hf.nx = geom.dims.nx;
    hf.ny = geom.dims.ny;
    hf.ox = geom.origin.x();
    hf.oy = geom.origin.y();
    hf.g = geom.spacing;
    hf.kind = kind;
    hf.rho = rho;
    hf.z.assign(std::size_t(hf.nx * hf.ny), std::nullopt);
    return hf;
}

/// Lowest and highest occupied layer of every column plus its occupied count.
struct ColumnExtents {
    std::vector<std::int32_t> lo, hi, count;
};

[[nodiscard]] inline ColumnExtents column_extents(const VoxelGrid& grid)
{
    const auto [nx, ny, nz] = grid.dims();
    ColumnExtents ce;
    const auto cols = std::size_t(nx * ny);
    ce.lo.assign(cols, -1);
    ce.hi.assign(cols, -1);
    ce.count.assign(cols, 0);
    for (std::int64_t k = 0; k < nz; ++k)
        for (std::int64_t j = 0; j < ny; ++j)
            for (std::int64_t i = 0; i < nx; ++i) {
                if (!grid.get(i, j, k)) continue;
                const auto c = std::size_t(i + nx * j);
                if (ce.lo[c] < 0) ce.lo[c] = std::int32_t(k);
                ce.hi[c] = std::int32_t(k);
                ++ce.count[c];
            }
    return ce;
}

struct SurfacePair {
    HeightField closing;
    HeightField opening;
};

/// Top and bottom faces of a closed extruded solid. The top is the closing
/// of the facet; the bottom is its opening, translated by minus the
/// extrusion depth.
[[nodiscard]] inline SurfacePair extract_surfaces(const VoxelGrid& closed_solid, double rho)
{
    const auto& geom = closed_solid.geometry();
    const double g = geom.spacing;
    const auto ce = column_extents(closed_solid);
    SurfacePair out{empty_heightfield(geom, SurfaceKind::closing, rho), empty_heightfield(geom, SurfaceKind::opening, rho)};
    for (std::int64_t j = 0; j < geom.dims.ny; ++j)
        for (std::int64_t i = 0; i < geom.dims.nx; ++i) {
            const auto c = std::size_t(i + geom.dims.nx * j);
            if (ce.count[c] == 0) continue;
            if (ce.hi[c] - ce.lo[c] + 1 != ce.count[c])
                throw TopologyError("extract_surfaces: column (" + std::to_string(i) + ", " + std::to_string(j) +
                                    ") is not z-convex at scale " + std::to_string(rho));
            out.closing.z[c] = geom.origin.z() + g * ce.hi[c] + g / 2;
            out.opening.z[c] = geom.origin.z() + g * ce.lo[c] - g / 2;
        }
    return out;
}

[[nodiscard]] inline HeightField lifted(HeightField hf, double dz)
{
    for (auto& v : hf.z)
        if (v) *v += dz;
    return hf;
}

struct Separation {
    std::vector<std::optional<double>> per_column;
    double max = 0;
    double mean = 0;
    std::size_t columns = 0;
};

/// closing.z - opening.z - depth per column, clamped at zero.
[[nodiscard]] inline Separation separation(const HeightField& closing, const HeightField& opening, double depth)
{
    if (!closing.same_layout(opening)) throw GeometryMismatchError("separation: heightfields have different layouts");
    Separation s;
    s.per_column.assign(closing.z.size(), std::nullopt);
    double sum = 0;
    for (std::size_t c = 0; c < closing.z.size(); ++c) {
        if (!closing.z[c] || !opening.z[c]) continue;
        const double d = std::max(0.0, *closing.z[c] - *opening.z[c] - depth);
        s.per_column[c] = d;
        s.max = std::max(s.max, d);
        sum += d;
        ++s.columns;
    }
    s.mean = s.columns ? sum / double(s.columns) : 0;
    return s;
}

/// Size of the digital top (or bottom) surface of an extruded solid. Only
/// interior columns (all four neighbouring columns occupied) take part, so
/// the side walls are left out, and only voxels in the upper half of their
/// column count for a closing, lower half for an opening.
struct SurfaceComplexity {
    std::int64_t surface_voxels = 0; ///< occupied voxels with an empty 6-neighbour
    std::int64_t exposed_faces = 0;  ///< voxel faces between occupied and empty
};

[[nodiscard]] inline SurfaceComplexity surface_complexity(const VoxelGrid& solid, SurfaceKind kind)
{
    const auto [nx, ny, nz] = solid.dims();
    const auto ce = column_extents(solid);
    SurfaceComplexity out;
    auto occ = [&](std::int64_t i, std::int64_t j, std::int64_t k) { return solid.get_or(i, j, k, false); };
    for (std::int64_t j = 0; j < ny; ++j)
        for (std::int64_t i = 0; i < nx; ++i) {
            const auto c = std::size_t(i + nx * j);
            if (ce.count[c] == 0) continue;
            auto column = [&](std::int64_t a, std::int64_t b) {
                return a >= 0 && b >= 0 && a < nx && b < ny && ce.count[std::size_t(a + nx * b)] > 0;
            };
            if (!column(i - 1, j) || !column(i + 1, j) || !column(i, j - 1) || !column(i, j + 1)) continue;
            const std::int64_t mid2 = std::int64_t(ce.lo[c]) + ce.hi[c]; // twice the midpoint
            for (std::int64_t k = ce.lo[c]; k <= ce.hi[c]; ++k) {
                if (!solid.get(i, j, k)) continue;
                const bool upper = 2 * k > mid2;
                const bool lower = 2 * k < mid2;
                if (kind == SurfaceKind::closing ? !upper : !lower) continue;
                const int open = !occ(i - 1, j, k) + !occ(i + 1, j, k) + !occ(i, j - 1, k) + !occ(i, j + 1, k) +
                                 !occ(i, j, k - 1) + !occ(i, j, k + 1);
                out.exposed_faces += open;
                out.surface_voxels += open > 0;
            }
        }
    return out;
}

/// Column-center vertices, two triangles per fully defined 2x2 block.
/// Closings face +z, openings -z.
[[nodiscard]] inline TriangleMesh to_mesh(const HeightField& hf, const std::string& name = {})
{
    std::vector<Vec3> verts;
    std::vector<std::uint32_t> id(hf.z.size(), UINT32_MAX);
    for (std::int64_t j = 0; j < hf.ny; ++j)
        for (std::int64_t i = 0; i < hf.nx; ++i)
            if (const auto& z = hf.at(i, j)) {
                id[hf.index(i, j)] = std::uint32_t(verts.size());
                verts.emplace_back(hf.x(i), hf.y(j), *z);
            }
    std::vector<Face> faces;
    const bool up = hf.kind == SurfaceKind::closing;
    for (std::int64_t j = 0; j + 1 < hf.ny; ++j)
        for (std::int64_t i = 0; i + 1 < hf.nx; ++i) {
            const auto a = id[hf.index(i, j)], b = id[hf.index(i + 1, j)];
            const auto c = id[hf.index(i + 1, j + 1)], d = id[hf.index(i, j + 1)];
            if (a == UINT32_MAX || b == UINT32_MAX || c == UINT32_MAX || d == UINT32_MAX) continue;
            if (up) {
                faces.push_back({a, b, c});
                faces.push_back({a, c, d});
            }
            else {
                faces.push_back({a, c, b});
                faces.push_back({a, d, c});
            }
        }
    return make_mesh(std::move(verts), std::move(faces), name);
}

/// Height of a +z facet under every column center of `layout`, by
/// barycentric interpolation of the triangle covering it (if any).
[[nodiscard]] inline std::vector<std::optional<double>> sample_facet(const TriangleMesh& facet, const HeightField& layout)
{
    std::vector<std::optional<double>> out(layout.z.size(), std::nullopt);
    for (const Face& f : facet.faces) {
        const Vec3& a = facet.vertices[f[0]];
        const Vec3& b = facet.vertices[f[1]];
        const Vec3& c = facet.vertices[f[2]];
        const double area2 = (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
        if (area2 == 0) continue;
        const auto i0 = std::max<std::int64_t>(0, std::int64_t(std::ceil((std::min({a.x(), b.x(), c.x()}) - layout.ox) / layout.g)));
        const auto i1 = std::min<std::int64_t>(layout.nx - 1, std::int64_t(std::floor((std::max({a.x(), b.x(), c.x()}) - layout.ox) / layout.g)));
        const auto j0 = std::max<std::int64_t>(0, std::int64_t(std::ceil((std::min({a.y(), b.y(), c.y()}) - layout.oy) / layout.g)));
        const auto j1 = std::min<std::int64_t>(layout.ny - 1, std::int64_t(std::floor((std::max({a.y(), b.y(), c.y()}) - layout.oy) / layout.g)));
        for (std::int64_t j = j0; j <= j1; ++j)
            for (std::int64_t i = i0; i <= i1; ++i) {
                const double px = layout.x(i), py = layout.y(j);
                const double wa = ((b.x() - px) * (c.y() - py) - (b.y() - py) * (c.x() - px)) / area2;
                const double wb = ((c.x() - px) * (a.y() - py) - (c.y() - py) * (a.x() - px)) / area2;
                const double wc = 1 - wa - wb;
                if (wa < -1e-12 || wb < -1e-12 || wc < -1e-12) continue;
                out[layout.index(i, j)] = wa * a.z() + wb * b.z() + wc * c.z();
            }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Provenance-based reliability

/// Per-column flag: 255 where the extremal voxel of the surface traces back
/// to a fracture-surface seed, 0 where it traces to the side wall, and 0 on
/// undefined columns. `defined` separates the two zero cases.
struct ReliabilityMask {
    std::int64_t nx = 0, ny = 0;
    std::vector<std::uint8_t> value;
    std::vector<std::uint8_t> defined;
    std::size_t unreliable = 0;
    /// Largest distance (mm) from an unreliable column to the nearest column
    /// outside the source footprint.
    double border_width = 0;
};

/// Seeds are voxels of the source solid that lie in an interior footprint
/// column (all four neighbouring columns occupied) and in the upper half of
/// their column for the closing, lower half for the opening. An extremal
/// voxel whose nearest source voxel is such a seed is shaped by the facet
/// rather than by the wall.
[[nodiscard]] inline ReliabilityMask reliability_mask(const VoxelGrid& source, const ProvenanceMap& prov,
                                                      const VoxelGrid& closed_solid, SurfaceKind kind)
{
    if (!(prov.geometry == source.geometry())) throw GeometryMismatchError("reliability_mask: provenance geometry differs from source");
    source.require_same_geometry(closed_solid);
    const auto& geom = source.geometry();
    const std::int64_t nx = geom.dims.nx, ny = geom.dims.ny;
    const auto src = column_extents(source);
    const auto out = column_extents(closed_solid);
    auto occupied = [&](std::int64_t i, std::int64_t j) {
        return i >= 0 && j >= 0 && i < nx && j < ny && src.count[std::size_t(i + nx * j)] > 0;
    };
    auto is_seed = [&](std::uint64_t f) {
        if (f == ProvenanceMap::kNone) return false;
        const auto v = geom.unflat(std::int64_t(f));
        if (!occupied(v.x - 1, v.y) || !occupied(v.x + 1, v.y) || !occupied(v.x, v.y - 1) || !occupied(v.x, v.y + 1)) return false;
        const auto c = std::size_t(v.x + nx * v.y);
        // twice the layer vs lo + hi avoids rounding the midpoint
        const std::int64_t twice = 2 * v.z, mid = std::int64_t(src.lo[c]) + src.hi[c];
        return kind == SurfaceKind::closing ? twice > mid : twice < mid;
    };

    ReliabilityMask m;
    m.nx = nx;
    m.ny = ny;
    m.value.assign(std::size_t(nx * ny), 0);
    m.defined.assign(std::size_t(nx * ny), 0);

    // distance to the outside of the footprint, via a one-layer transform
    GridGeometry flat;
    flat.dims = {nx, ny, 1};
    flat.spacing = geom.spacing;
    VoxelGrid outside(flat);
    for (std::int64_t j = 0; j < ny; ++j)
        for (std::int64_t i = 0; i < nx; ++i)
            if (!occupied(i, j)) outside.set(i, j, 0);
    const auto border = edt(outside, Feature::occupied, {.exterior_is_feature = true}).field;

    for (std::int64_t j = 0; j < ny; ++j)
        for (std::int64_t i = 0; i < nx; ++i) {
            const auto c = std::size_t(i + nx * j);
            if (out.count[c] == 0) continue;
            m.defined[c] = 1;
            const std::int64_t k = kind == SurfaceKind::closing ? out.hi[c] : out.lo[c];
            if (is_seed(prov.nearest[std::size_t(geom.flat(i, j, k))])) {
                m.value[c] = 255;
            }
            else {
                ++m.unreliable;
                m.border_width = std::max(m.border_width, border.distance(std::int64_t(c)));
            }
        }
    return m;
}

/// Binary PGM (P5), rows written in increasing y.
inline void write_pgm(std::ostream& out, const ReliabilityMask& m)
{
    out << "P5\n" << m.nx << ' ' << m.ny << "\n255\n";
    out.write(reinterpret_cast<const char*>(m.value.data()), std::streamsize(m.value.size()));
}

inline void save_pgm(const std::string& path, const ReliabilityMask& m)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ResourceError("cannot open " + path + " for writing");
    write_pgm(out, m);
}

} // namespace fracmorph
