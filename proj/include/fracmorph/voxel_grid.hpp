#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "common.hpp"
#include "mesh.hpp"

namespace fracmorph {

struct Dims {
    std::int64_t nx = 1, ny = 1, nz = 1;

    [[nodiscard]] std::int64_t count() const noexcept { return nx * ny * nz; }
    friend bool operator==(const Dims&, const Dims&) = default;
};

struct Index3 {
    std::int64_t x = 0, y = 0, z = 0;
    friend bool operator==(const Index3&, const Index3&) = default;
};

/// Lattice placement shared by occupancy grids and distance fields.
/// `origin` is the world position of the center of voxel (0,0,0).
struct GridGeometry {
    Vec3 origin{Vec3::Zero()};
    double spacing = 1;
    Dims dims;

    [[nodiscard]] std::int64_t count() const noexcept { return dims.count(); }
    [[nodiscard]] std::int64_t flat(std::int64_t x, std::int64_t y, std::int64_t z) const noexcept
    {
        return x + dims.nx * (y + dims.ny * z);
    }
    [[nodiscard]] std::int64_t flat(const Index3& i) const noexcept { return flat(i.x, i.y, i.z); }
    [[nodiscard]] Index3 unflat(std::int64_t f) const noexcept
    {
        return {f % dims.nx, (f / dims.nx) % dims.ny, f / (dims.nx * dims.ny)};
    }
    [[nodiscard]] bool in_range(std::int64_t x, std::int64_t y, std::int64_t z) const noexcept
    {
        return x >= 0 && y >= 0 && z >= 0 && x < dims.nx && y < dims.ny && z < dims.nz;
    }
    [[nodiscard]] Vec3 world(const Index3& i) const noexcept
    {
        return origin + spacing * Vec3(double(i.x), double(i.y), double(i.z));
    }
    /// Nearest lattice index; may be out of range.
    [[nodiscard]] Index3 nearest_index(const Vec3& p) const noexcept
    {
        const Vec3 q = (p - origin) / spacing;
        return {std::llround(q.x()), std::llround(q.y()), std::llround(q.z())};
    }

    friend bool operator==(const GridGeometry& a, const GridGeometry& b)
    {
        return a.origin == b.origin && a.spacing == b.spacing && a.dims == b.dims;
    }
};

/// Binary occupancy lattice, bit-packed 64 voxels per word in flat order
/// (x fastest). Bits past the last voxel are always zero.
class VoxelGrid {
public:
    VoxelGrid() : VoxelGrid(GridGeometry{}) {}

    explicit VoxelGrid(GridGeometry geom) : geom_(std::move(geom))
    {
        if (geom_.dims.nx < 1 || geom_.dims.ny < 1 || geom_.dims.nz < 1)
            throw std::invalid_argument("VoxelGrid: dims must be >= 1");
        if (!(geom_.spacing > 0)) throw std::invalid_argument("VoxelGrid: spacing must be positive");
        words_.assign(static_cast<std::size_t>((geom_.count() + 63) / 64), 0);
    }

    [[nodiscard]] const GridGeometry& geometry() const noexcept { return geom_; }
    [[nodiscard]] const Dims& dims() const noexcept { return geom_.dims; }
    [[nodiscard]] double spacing() const noexcept { return geom_.spacing; }
    [[nodiscard]] std::int64_t size() const noexcept { return geom_.count(); }

    [[nodiscard]] bool get(std::int64_t f) const noexcept { return (words_[std::size_t(f >> 6)] >> (f & 63)) & 1u; }
    [[nodiscard]] bool get(std::int64_t x, std::int64_t y, std::int64_t z) const noexcept { return get(geom_.flat(x, y, z)); }
    /// Out-of-range lookups return `outside`.
    [[nodiscard]] bool get_or(std::int64_t x, std::int64_t y, std::int64_t z, bool outside) const noexcept
    {
        return geom_.in_range(x, y, z) ? get(x, y, z) : outside;
    }

    void set(std::int64_t f, bool v = true) noexcept
    {
        const std::uint64_t bit = std::uint64_t{1} << (f & 63);
        auto& w = words_[std::size_t(f >> 6)];
        w = v ? (w | bit) : (w & ~bit);
    }
    void set(std::int64_t x, std::int64_t y, std::int64_t z, bool v = true) noexcept { set(geom_.flat(x, y, z), v); }

    [[nodiscard]] std::int64_t count() const noexcept
    {
        std::int64_t c = 0;
        for (auto w : words_) c += std::popcount(w);
        return c;
    }
    [[nodiscard]] bool empty() const noexcept
    {
        return std::all_of(words_.begin(), words_.end(), [](auto w) { return w == 0; });
    }

    [[nodiscard]] std::span<const std::uint64_t> words() const noexcept { return words_; }
    [[nodiscard]] std::span<std::uint64_t> words() noexcept { return words_; }

    [[nodiscard]] VoxelGrid complemented() const
    {
        VoxelGrid out = *this;
        for (auto& w : out.words_) w = ~w;
        out.clear_tail();
        return out;
    }

    VoxelGrid& operator&=(const VoxelGrid& o) { return combine(o, [](auto a, auto b) { return a & b; }); }
    VoxelGrid& operator|=(const VoxelGrid& o) { return combine(o, [](auto a, auto b) { return a | b; }); }
    VoxelGrid& operator^=(const VoxelGrid& o) { return combine(o, [](auto a, auto b) { return a ^ b; }); }
    /// this \ o
    VoxelGrid& subtract(const VoxelGrid& o) { return combine(o, [](auto a, auto b) { return a & ~b; }); }

    friend VoxelGrid operator&(VoxelGrid a, const VoxelGrid& b) { return a &= b; }
    friend VoxelGrid operator|(VoxelGrid a, const VoxelGrid& b) { return a |= b; }
    friend VoxelGrid operator^(VoxelGrid a, const VoxelGrid& b) { return a ^= b; }
    friend VoxelGrid operator-(VoxelGrid a, const VoxelGrid& b) { return a.subtract(b); }
    friend VoxelGrid operator~(const VoxelGrid& a) { return a.complemented(); }

    /// Bit-identical occupancy on identical geometry.
    friend bool operator==(const VoxelGrid& a, const VoxelGrid& b)
    {
        return a.geom_ == b.geom_ && a.words_ == b.words_;
    }

    [[nodiscard]] bool is_subset_of(const VoxelGrid& o) const
    {
        require_same_geometry(o);
        for (std::size_t i = 0; i < words_.size(); ++i)
            if (words_[i] & ~o.words_[i]) return false;
        return true;
    }

    void require_same_geometry(const VoxelGrid& o) const
    {
        if (!(geom_ == o.geom_)) throw GeometryMismatchError("voxel grids are not co-registered");
    }

    /// True when any occupied voxel lies on the outermost layer of the grid.
    [[nodiscard]] bool touches_boundary() const
    {
        const auto [nx, ny, nz] = geom_.dims;
        for (std::int64_t z = 0; z < nz; ++z)
            for (std::int64_t y = 0; y < ny; ++y) {
                const bool full_row = z == 0 || z == nz - 1 || y == 0 || y == ny - 1;
                if (full_row) {
                    for (std::int64_t x = 0; x < nx; ++x)
                        if (get(x, y, z)) return true;
                }
                else if (get(0, y, z) || get(nx - 1, y, z)) {
                    return true;
                }
            }
        return false;
    }

private:
    template <class Op>
    VoxelGrid& combine(const VoxelGrid& o, Op op)
    {
        require_same_geometry(o);
        for (std::size_t i = 0; i < words_.size(); ++i) words_[i] = op(words_[i], o.words_[i]);
        clear_tail();
        return *this;
    }

    void clear_tail() noexcept
    {
        const auto rem = geom_.count() & 63;
        if (rem && !words_.empty()) words_.back() &= (std::uint64_t{1} << rem) - 1;
    }

    GridGeometry geom_;
    std::vector<std::uint64_t> words_;
};

// ---------------------------------------------------------------------------
// Grid planning

/// Voxels needed on each side so the largest dilation stays inside the grid.
[[nodiscard]] inline std::int64_t required_padding(double rho_max, double g)
{
    if (!(rho_max > 0) || !(g > 0)) throw std::invalid_argument("required_padding: inputs must be positive");
    // guard against 30/0.2 = 150.00000000000003 style rounding
    const double q = rho_max / g;
    const double r = std::round(q);
    const double c = std::abs(q - r) <= 1e-9 * std::max(1.0, q) ? r : std::ceil(q);
    return static_cast<std::int64_t>(c) + 1;
}

/// Largest surface displacement caused by center sampling at spacing g.
[[nodiscard]] inline double discretization_bound(double g)
{
    if (!(g > 0)) throw std::invalid_argument("discretization_bound: g must be positive");
    return std::sqrt(3.0) * g / 2;
}

[[nodiscard]] inline Dims padded_dims(const Dims& tight, std::int64_t pad)
{
    return {tight.nx + 2 * pad, tight.ny + 2 * pad, tight.nz + 2 * pad};
}

/// Tight lattice over a bounding box: ceil(extent / g) voxels per axis (at
/// least one), centered on the box.
[[nodiscard]] inline GridGeometry tight_geometry(const Aabb& box, double g)
{
    GridGeometry geom;
    geom.spacing = g;
    const Vec3 ext = box.hi - box.lo;
    auto n = [g](double e) {
        const double q = e / g;
        const double r = std::round(q);
        const double c = std::abs(q - r) <= 1e-9 * std::max(1.0, q) ? r : std::ceil(q);
        return std::max<std::int64_t>(1, static_cast<std::int64_t>(c));
    };
    geom.dims = {n(ext.x()), n(ext.y()), n(ext.z())};
    const Vec3 center = 0.5 * (box.lo + box.hi);
    geom.origin = center - 0.5 * g * Vec3(double(geom.dims.nx - 1), double(geom.dims.ny - 1), double(geom.dims.nz - 1));
    return geom;
}

[[nodiscard]] inline GridGeometry pad_geometry(const GridGeometry& tight, std::int64_t pad)
{
    GridGeometry out = tight;
    out.dims = padded_dims(tight.dims, pad);
    out.origin -= tight.spacing * double(pad) * Vec3::Ones();
    return out;
}

namespace detail {

// Point-in-triangle edge test with a top-left fill rule: a ray that lands
// exactly on an edge shared by two triangles is claimed by exactly one of
// them. The equal x/y ray offset runs parallel to diagonal mesh edges, so
// such hits are common on regular triangulations. `w` is the signed
// sub-area opposite edge p->q, `sgn` the sign of the triangle's area.
inline bool owns(double w, double sgn, const Vec3& p, const Vec3& q)
{
    const double sw = sgn * w;
    if (sw != 0) return sw > 0;
    // direction of the edge in the counter-clockwise orientation
    const double ex = sgn * (q.x() - p.x());
    const double ey = sgn * (q.y() - p.y());
    return ey < 0 || (ey == 0 && ex < 0);
}

} // namespace detail

inline constexpr std::int64_t kDefaultVoxelCap = 2'000'000'000;

struct VoxelizeOptions {
    std::int64_t voxel_cap = kDefaultVoxelCap;
};

/// Occupancy by +z ray parity at voxel centers. Rays are shifted by g*1e-4
/// in x and y, and any hit still landing on an edge goes to one triangle by
/// the fill rule in detail::owns. A center is inside when an odd number of
/// surface crossings lie above it.
[[nodiscard]] inline VoxelGrid voxelize_in(const TriangleMesh& solid, const GridGeometry& geom, const VoxelizeOptions& opt = {})
{
    if (geom.count() > opt.voxel_cap)
        throw ResourceError("grid of " + std::to_string(geom.count()) + " voxels exceeds cap " + std::to_string(opt.voxel_cap));
    if (!is_watertight(solid)) throw TopologyError("voxelize: solid is not watertight");

    const double g = geom.spacing;
    const double shift = g * 1e-4;
    const auto [nx, ny, nz] = geom.dims;
    // crossings per column
    std::vector<std::vector<double>> hits(static_cast<std::size_t>(nx * ny));
    for (const Face& f : solid.faces) {
        const Vec3& a = solid.vertices[f[0]];
        const Vec3& b = solid.vertices[f[1]];
        const Vec3& c = solid.vertices[f[2]];
        const double area2 = (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
        if (area2 == 0) continue; // parallel to the ray
        const double sgn = area2 > 0 ? 1.0 : -1.0;
        const double xmin = std::min({a.x(), b.x(), c.x()}), xmax = std::max({a.x(), b.x(), c.x()});
        const double ymin = std::min({a.y(), b.y(), c.y()}), ymax = std::max({a.y(), b.y(), c.y()});
        const auto i0 = std::max<std::int64_t>(0, std::int64_t(std::ceil((xmin - shift - geom.origin.x()) / g)));
        const auto i1 = std::min<std::int64_t>(nx - 1, std::int64_t(std::floor((xmax - shift - geom.origin.x()) / g)));
        const auto j0 = std::max<std::int64_t>(0, std::int64_t(std::ceil((ymin - shift - geom.origin.y()) / g)));
        const auto j1 = std::min<std::int64_t>(ny - 1, std::int64_t(std::floor((ymax - shift - geom.origin.y()) / g)));
        for (std::int64_t j = j0; j <= j1; ++j) {
            const double py = geom.origin.y() + g * double(j) + shift;
            for (std::int64_t i = i0; i <= i1; ++i) {
                const double px = geom.origin.x() + g * double(i) + shift;
                // barycentric via signed sub-areas
                const double wa = (b.x() - px) * (c.y() - py) - (b.y() - py) * (c.x() - px);
                const double wb = (c.x() - px) * (a.y() - py) - (c.y() - py) * (a.x() - px);
                const double wc = (a.x() - px) * (b.y() - py) - (a.y() - py) * (b.x() - px);
                if (!(detail::owns(wa, sgn, b, c) && detail::owns(wb, sgn, c, a) && detail::owns(wc, sgn, a, b))) continue;
                const double z = (wa * a.z() + wb * b.z() + wc * c.z()) / area2;
                hits[std::size_t(i + nx * j)].push_back(z);
            }
        }
    }

    VoxelGrid grid(geom);
    for (std::int64_t j = 0; j < ny; ++j)
        for (std::int64_t i = 0; i < nx; ++i) {
            auto& h = hits[std::size_t(i + nx * j)];
            if (h.empty()) continue;
            std::sort(h.begin(), h.end());
            // walk centers bottom-up; parity of crossings above decides
            std::size_t below = 0;
            for (std::int64_t k = 0; k < nz; ++k) {
                const double zc = geom.origin.z() + g * double(k);
                while (below < h.size() && h[below] < zc) ++below;
                if ((h.size() - below) % 2 == 1) grid.set(i, j, k);
            }
        }
    return grid;
}

/// Tight grid around the solid, padded by `pad` empty voxels on every side.
[[nodiscard]] inline VoxelGrid voxelize(const TriangleMesh& solid, double g, std::int64_t pad, const VoxelizeOptions& opt = {})
{
    if (!(g > 0)) throw std::invalid_argument("voxelize: g must be positive");
    if (pad < 0) throw std::invalid_argument("voxelize: negative padding");
    return voxelize_in(solid, pad_geometry(tight_geometry(bounds(solid), g), pad), opt);
}

// ---------------------------------------------------------------------------
// Container formats: "<MAGIC>\n" + ASCII header + blank line + payload.

namespace detail {

inline void write_header(std::ostream& out, const char* magic, const GridGeometry& g)
{
    char buf[160];
    out << magic << '\n';
    out << "dims " << g.dims.nx << ' ' << g.dims.ny << ' ' << g.dims.nz << '\n';
    std::snprintf(buf, sizeof buf, "origin %.17g %.17g %.17g\n", g.origin.x(), g.origin.y(), g.origin.z());
    out << buf;
    std::snprintf(buf, sizeof buf, "spacing %.17g\n", g.spacing);
    out << buf << '\n';
}

inline GridGeometry read_header(std::istream& in, const char* magic)
{
    std::string line;
    if (!std::getline(in, line) || line != magic) throw ParseError(std::string("expected ") + magic + " magic");
    GridGeometry g;
    bool have_dims = false, have_origin = false, have_spacing = false;
    while (std::getline(in, line) && !line.empty()) {
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "dims") have_dims = static_cast<bool>(ls >> g.dims.nx >> g.dims.ny >> g.dims.nz);
        else if (key == "origin") {
            double x, y, z;
            have_origin = static_cast<bool>(ls >> x >> y >> z);
            g.origin = Vec3(x, y, z);
        }
        else if (key == "spacing") have_spacing = static_cast<bool>(ls >> g.spacing);
        else throw ParseError("unknown header line '" + line + "'");
    }
    if (!have_dims || !have_origin || !have_spacing) throw ParseError(std::string(magic) + ": incomplete header");
    if (g.dims.nx < 1 || g.dims.ny < 1 || g.dims.nz < 1 || !(g.spacing > 0)) throw ParseError(std::string(magic) + ": invalid geometry");
    return g;
}

inline void write_u64_le(std::ostream& out, std::span<const std::uint64_t> words)
{
    static_assert(std::endian::native == std::endian::little, "big-endian hosts need byte swapping");
    out.write(reinterpret_cast<const char*>(words.data()), std::streamsize(words.size() * sizeof(std::uint64_t)));
}

inline void read_u64_le(std::istream& in, std::span<std::uint64_t> words)
{
    in.read(reinterpret_cast<char*>(words.data()), std::streamsize(words.size() * sizeof(std::uint64_t)));
    if (in.gcount() != std::streamsize(words.size() * sizeof(std::uint64_t))) throw ParseError("truncated payload");
}

} // namespace detail

inline constexpr const char* kVgridMagic = "VGRID1";

inline void write_vgrid(std::ostream& out, const VoxelGrid& grid)
{
    detail::write_header(out, kVgridMagic, grid.geometry());
    detail::write_u64_le(out, grid.words());
}

[[nodiscard]] inline VoxelGrid read_vgrid(std::istream& in)
{
    VoxelGrid grid(detail::read_header(in, kVgridMagic));
    detail::read_u64_le(in, grid.words());
    const auto rem = grid.size() & 63;
    if (rem && (grid.words().back() >> rem) != 0) throw ParseError("VGRID1: nonzero padding bits");
    return grid;
}

inline void save_vgrid(const std::string& path, const VoxelGrid& grid)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ResourceError("cannot write " + path);
    write_vgrid(out, grid);
}

[[nodiscard]] inline VoxelGrid load_vgrid(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path);
    return read_vgrid(in);
}

} // namespace fracmorph
