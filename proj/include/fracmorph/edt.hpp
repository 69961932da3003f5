#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "voxel_grid.hpp"

namespace fracmorph {

/// Exact squared distances, in voxel units, to the nearest feature voxel.
/// Voxels with no reachable feature hold `infinity`, which is one more than
/// the largest squared distance the grid can contain.
struct DistanceField {
    GridGeometry geometry;
    std::vector<std::uint32_t> d2;
    std::uint32_t infinity = 0;

    [[nodiscard]] bool is_infinite(std::int64_t f) const noexcept { return d2[std::size_t(f)] >= infinity; }
    /// Euclidean distance in millimetres; +inf for unreachable voxels.
    [[nodiscard]] double distance(std::int64_t f) const noexcept
    {
        return is_infinite(f) ? std::numeric_limits<double>::infinity()
                              : std::sqrt(double(d2[std::size_t(f)])) * geometry.spacing;
    }
};

/// Flat index of one nearest feature voxel per voxel; ties go to the
/// smallest flat index.
struct ProvenanceMap {
    static constexpr std::uint64_t kNone = std::numeric_limits<std::uint64_t>::max();
    GridGeometry geometry;
    std::vector<std::uint64_t> nearest;
};

enum class Feature { occupied, empty };

struct EdtOptions {
    bool provenance = false;
    /// Treat every lattice point outside the grid as a feature.
    bool exterior_is_feature = false;
};

struct EdtResult {
    DistanceField field;
    std::optional<ProvenanceMap> provenance;
};

[[nodiscard]] inline std::uint32_t infinity_for(const Dims& d)
{
    const auto sq = [](std::int64_t n) { return (n - 1) * (n - 1); };
    const std::int64_t max_d2 = sq(d.nx) + sq(d.ny) + sq(d.nz);
    if (max_d2 + 1 >= std::int64_t{std::numeric_limits<std::uint32_t>::max()})
        throw ResourceError("grid too large for 32-bit squared distances");
    return static_cast<std::uint32_t>(max_d2 + 1);
}

namespace detail {

/// Lower envelope of parabolas (q - i)^2 + f[i] over the finite entries of
/// f, evaluated at every q. Breakpoints are compared as exact rationals and
/// ties resolve to the smallest i. Returns false when no entry is finite.
class Envelope {
public:
    explicit Envelope(std::size_t n) : v_(n) {}

    bool run(const std::int64_t* f, std::int64_t inf, std::int64_t n, std::int64_t* out, std::int32_t* arg)
    {
        std::int64_t k = -1;
        for (std::int64_t q = 0; q < n; ++q) {
            if (f[q] >= inf) continue;
            while (k >= 1 && !before(f, v_[std::size_t(k - 1)], v_[std::size_t(k)], q)) --k;
            v_[std::size_t(++k)] = static_cast<std::int32_t>(q);
        }
        if (k < 0) return false;
        std::int64_t j = 0;
        for (std::int64_t q = 0; q < n; ++q) {
            while (j < k && value(f, v_[std::size_t(j + 1)], q) < value(f, v_[std::size_t(j)], q)) ++j;
            const std::int32_t best = v_[std::size_t(j)];
            out[q] = value(f, best, q);
            arg[q] = best;
        }
        return true;
    }

private:
    static std::int64_t value(const std::int64_t* f, std::int64_t i, std::int64_t q) { return (q - i) * (q - i) + f[i]; }

    // breakpoint(a, b) < breakpoint(b, c), with a < b < c
    static bool before(const std::int64_t* f, std::int64_t a, std::int64_t b, std::int64_t c)
    {
        const std::int64_t n1 = (f[b] + b * b) - (f[a] + a * a);
        const std::int64_t d1 = 2 * (b - a);
        const std::int64_t n2 = (f[c] + c * c) - (f[b] + b * b);
        const std::int64_t d2 = 2 * (c - b);
        return n1 * d2 < n2 * d1;
    }

    std::vector<std::int32_t> v_;
};

inline constexpr std::int64_t kLineBlock = 16;

/// One separable pass along an axis with the given stride. Lines are
/// processed in blocks of consecutive x to keep strided gathers cache-friendly.
template <bool WithProv>
void edt_axis_pass(const GridGeometry& geom, int axis, std::vector<std::uint32_t>& d2, std::uint32_t inf,
                   std::vector<std::uint64_t>* prov)
{
    const auto [nx, ny, nz] = geom.dims;
    const std::int64_t n = axis == 1 ? ny : nz;
    const std::int64_t stride = axis == 1 ? nx : nx * ny;
    // outer index enumerates the remaining non-x axis
    const std::int64_t outer = axis == 1 ? nz : ny;
    const std::int64_t outer_stride = axis == 1 ? nx * ny : nx;

    parallel::for_chunks(static_cast<std::size_t>(outer), [&](std::size_t ob, std::size_t oe) {
        const std::size_t cells = static_cast<std::size_t>(n * kLineBlock);
        std::vector<std::int64_t> f(cells), out(cells);
        std::vector<std::int32_t> arg(cells);
        std::vector<std::uint64_t> pin(WithProv ? cells : 0);
        std::vector<std::int64_t> line(static_cast<std::size_t>(n)), line_out(static_cast<std::size_t>(n));
        std::vector<std::int32_t> line_arg(static_cast<std::size_t>(n));
        Envelope env(static_cast<std::size_t>(n));
        for (std::int64_t o = std::int64_t(ob); o < std::int64_t(oe); ++o) {
            for (std::int64_t x0 = 0; x0 < nx; x0 += kLineBlock) {
                const std::int64_t bw = std::min(kLineBlock, nx - x0);
                const std::int64_t base = o * outer_stride + x0;
                for (std::int64_t q = 0; q < n; ++q) {
                    const std::int64_t at = base + q * stride;
                    for (std::int64_t b = 0; b < bw; ++b) {
                        f[std::size_t(b * n + q)] = d2[std::size_t(at + b)];
                        if constexpr (WithProv) pin[std::size_t(b * n + q)] = (*prov)[std::size_t(at + b)];
                    }
                }
                for (std::int64_t b = 0; b < bw; ++b) {
                    const std::int64_t* fl = f.data() + b * n;
                    std::int64_t* ol = out.data() + b * n;
                    std::int32_t* al = arg.data() + b * n;
                    if (!env.run(fl, inf, n, ol, al)) {
                        for (std::int64_t q = 0; q < n; ++q) {
                            ol[q] = inf;
                            al[q] = -1;
                        }
                    }
                }
                for (std::int64_t q = 0; q < n; ++q) {
                    const std::int64_t at = base + q * stride;
                    for (std::int64_t b = 0; b < bw; ++b) {
                        const std::int64_t v = out[std::size_t(b * n + q)];
                        d2[std::size_t(at + b)] = static_cast<std::uint32_t>(v >= inf ? inf : v);
                        if constexpr (WithProv) {
                            const std::int32_t a = arg[std::size_t(b * n + q)];
                            (*prov)[std::size_t(at + b)] = a < 0 ? ProvenanceMap::kNone : pin[std::size_t(b * n + a)];
                        }
                    }
                }
            }
        }
    });
}

template <bool WithProv>
void edt_x_pass(const VoxelGrid& grid, bool feature_bit, std::vector<std::uint32_t>& d2, std::uint32_t inf,
                std::vector<std::uint64_t>* prov)
{
    const auto& geom = grid.geometry();
    const auto [nx, ny, nz] = geom.dims;
    parallel::for_chunks(static_cast<std::size_t>(ny * nz), [&](std::size_t rb, std::size_t re) {
        std::vector<std::int64_t> left(static_cast<std::size_t>(nx));
        for (std::int64_t r = std::int64_t(rb); r < std::int64_t(re); ++r) {
            const std::int64_t base = r * nx;
            std::int64_t last = -1;
            for (std::int64_t x = 0; x < nx; ++x) {
                if (grid.get(base + x) == feature_bit) last = x;
                left[std::size_t(x)] = last;
            }
            std::int64_t next = -1;
            for (std::int64_t x = nx - 1; x >= 0; --x) {
                if (grid.get(base + x) == feature_bit) next = x;
                const std::int64_t l = left[std::size_t(x)];
                std::int64_t best = -1;
                if (l >= 0 && next >= 0) best = (x - l) <= (next - x) ? l : next; // tie -> smaller x
                else best = l >= 0 ? l : next;
                const auto at = std::size_t(base + x);
                if (best < 0) {
                    d2[at] = inf;
                    if constexpr (WithProv) (*prov)[at] = ProvenanceMap::kNone;
                }
                else {
                    d2[at] = static_cast<std::uint32_t>((x - best) * (x - best));
                    if constexpr (WithProv) (*prov)[at] = static_cast<std::uint64_t>(base + best);
                }
            }
        }
    });
}

template <bool WithProv>
EdtResult edt_impl(const VoxelGrid& grid, Feature features, const EdtOptions& opt)
{
    const auto& geom = grid.geometry();
    EdtResult res;
    res.field.geometry = geom;
    res.field.infinity = infinity_for(geom.dims);
    const std::uint32_t inf = res.field.infinity;
    res.field.d2.resize(std::size_t(geom.count()));
    std::vector<std::uint64_t>* prov = nullptr;
    if constexpr (WithProv) {
        res.provenance.emplace();
        res.provenance->geometry = geom;
        res.provenance->nearest.resize(std::size_t(geom.count()));
        prov = &res.provenance->nearest;
    }
    edt_x_pass<WithProv>(grid, features == Feature::occupied, res.field.d2, inf, prov);
    if (geom.dims.ny > 1) edt_axis_pass<WithProv>(geom, 1, res.field.d2, inf, prov);
    if (geom.dims.nz > 1) edt_axis_pass<WithProv>(geom, 2, res.field.d2, inf, prov);

    if (opt.exterior_is_feature) {
        const auto [nx, ny, nz] = geom.dims;
        // nearest exterior lattice point differs from v in exactly one coordinate
        auto border = [](std::int64_t i, std::int64_t n) { return std::min((i + 1) * (i + 1), (n - i) * (n - i)); };
        auto& d2 = res.field.d2;
        parallel::for_chunks(static_cast<std::size_t>(nz), [&](std::size_t zb, std::size_t ze) {
            for (std::int64_t z = std::int64_t(zb); z < std::int64_t(ze); ++z)
                for (std::int64_t y = 0; y < ny; ++y)
                    for (std::int64_t x = 0; x < nx; ++x) {
                        const std::int64_t b = std::min({border(x, nx), border(y, ny), border(z, nz)});
                        auto& cell = d2[std::size_t(geom.flat(x, y, z))];
                        if (b < std::int64_t(cell)) cell = static_cast<std::uint32_t>(b);
                    }
        });
    }
    return res;
}

} // namespace detail

/// Exact Euclidean distance transform with optional nearest-feature map.
/// Separable: a two-sided scan along x, then lower envelopes of parabolas
/// along y and z. Linear in the number of voxels.
[[nodiscard]] inline EdtResult edt(const VoxelGrid& grid, Feature features, const EdtOptions& opt = {})
{
    if (opt.provenance && opt.exterior_is_feature)
        throw std::invalid_argument("edt: exterior features have no provenance index");
    return opt.provenance ? detail::edt_impl<true>(grid, features, opt) : detail::edt_impl<false>(grid, features, opt);
}

/// floor((rho / g)^2), snapped to the nearest integer when within 1e-9 of
/// it so that e.g. rho = 3 * 0.2 gives 9 rather than 8.
[[nodiscard]] inline std::int64_t squared_radius_voxels(double rho, double g)
{
    if (rho < 0) throw std::invalid_argument("radius must be non-negative");
    const double q = (rho / g) * (rho / g);
    const double r = std::round(q);
    if (std::abs(q - r) <= 1e-9 * std::max(1.0, q)) return static_cast<std::int64_t>(r);
    return static_cast<std::int64_t>(std::floor(q));
}

enum class Sense { within, beyond };

/// {v : d2(v) <= floor((rho/g)^2)} for `within`, the complement for `beyond`.
[[nodiscard]] inline VoxelGrid level_set(const DistanceField& field, double rho, Sense sense = Sense::within)
{
    const std::int64_t t = squared_radius_voxels(rho, field.geometry.spacing);
    VoxelGrid out(field.geometry);
    auto words = out.words();
    const std::int64_t n = field.geometry.count();
    const bool want = sense == Sense::within;
    parallel::for_chunks(words.size(), [&](std::size_t wb, std::size_t we) {
        for (std::size_t w = wb; w < we; ++w) {
            std::uint64_t bits = 0;
            const std::int64_t base = std::int64_t(w) * 64;
            const std::int64_t end = std::min<std::int64_t>(64, n - base);
            for (std::int64_t b = 0; b < end; ++b) {
                const auto d = field.d2[std::size_t(base + b)];
                const bool inside = d < field.infinity && std::int64_t(d) <= t;
                if (inside == want) bits |= std::uint64_t{1} << b;
            }
            words[w] = bits;
        }
    });
    return out;
}

// DFLD1 / PROV1 containers: VGRID1-style header, one little-endian u64 per voxel.

inline constexpr const char* kDfldMagic = "DFLD1";
inline constexpr const char* kProvMagic = "PROV1";

inline void write_dfld(std::ostream& out, const DistanceField& field)
{
    detail::write_header(out, kDfldMagic, field.geometry);
    std::vector<std::uint64_t> payload(field.d2.begin(), field.d2.end());
    detail::write_u64_le(out, payload);
}

[[nodiscard]] inline DistanceField read_dfld(std::istream& in)
{
    DistanceField f;
    f.geometry = detail::read_header(in, kDfldMagic);
    f.infinity = infinity_for(f.geometry.dims);
    std::vector<std::uint64_t> payload(std::size_t(f.geometry.count()));
    detail::read_u64_le(in, payload);
    f.d2.resize(payload.size());
    for (std::size_t i = 0; i < payload.size(); ++i) {
        if (payload[i] > f.infinity) throw ParseError("DFLD1: value exceeds the infinity sentinel");
        f.d2[i] = static_cast<std::uint32_t>(payload[i]);
    }
    return f;
}

inline void write_prov(std::ostream& out, const ProvenanceMap& prov)
{
    detail::write_header(out, kProvMagic, prov.geometry);
    detail::write_u64_le(out, prov.nearest);
}

[[nodiscard]] inline ProvenanceMap read_prov(std::istream& in)
{
    ProvenanceMap p;
    p.geometry = detail::read_header(in, kProvMagic);
    p.nearest.resize(std::size_t(p.geometry.count()));
    detail::read_u64_le(in, p.nearest);
    return p;
}

} // namespace fracmorph
