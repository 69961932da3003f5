#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "mesh.hpp"
#include "voxel_grid.hpp"

namespace fracmorph {

/// SplitMix64 (Steele, Lea & Flood). State advances by 0x9E3779B97F4A7C15;
/// output mixes with 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB. Fixed
/// constants give the same stream in any implementation language.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    std::uint64_t next() noexcept
    {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    /// Uniform in [0, 1) from the top 53 bits.
    double uniform() noexcept { return double(next() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

struct SynthSpec {
    std::uint64_t seed = 1;
    double extent_x = 20; ///< mm
    double extent_y = 20;
    double slope_cap = 1; ///< bound on |grad z|
    int components = 6;
    double wavelength_min = 4; ///< mm
    double wavelength_max = 10;
    double step = 0.25; ///< facet sampling step, mm

    void validate() const
    {
        if (!(slope_cap > 0)) throw ConfigError("synth: slope cap must be positive");
        if (!(extent_x > 0) || !(extent_y > 0)) throw ConfigError("synth: extents must be positive");
        if (!(step > 0)) throw ConfigError("synth: sampling step must be positive");
        if (components < 0) throw ConfigError("synth: negative component count");
        if (components > 0) {
            if (!(wavelength_min <= wavelength_max)) throw ConfigError("synth: empty wavelength band");
            if (wavelength_min < 2 * step) throw ConfigError("synth: wavelengths below twice the sampling step alias");
        }
    }
};

struct CosineComponent {
    double amplitude = 0;
    double kx = 0, ky = 0; ///< wave vector, rad/mm
    double phase = 0;
};

/// z(x, y) = sum a_i cos(k_i . (x, y) + phi_i), centered on the origin.
struct SynthSurface {
    std::vector<CosineComponent> components;

    [[nodiscard]] double height(double x, double y) const noexcept
    {
        double z = 0;
        for (const auto& c : components) z += c.amplitude * std::cos(c.kx * x + c.ky * y + c.phase);
        return z;
    }
    /// sum a_i |k_i|: an upper bound on |grad z| attained by one component.
    [[nodiscard]] double slope_bound() const noexcept
    {
        double s = 0;
        for (const auto& c : components) s += c.amplitude * std::hypot(c.kx, c.ky);
        return s;
    }
    [[nodiscard]] double amplitude_bound() const noexcept
    {
        double a = 0;
        for (const auto& c : components) a += std::abs(c.amplitude);
        return a;
    }
};

/// Draw order per component: direction, wavelength, phase, weight.
[[nodiscard]] inline SynthSurface make_surface(const SynthSpec& spec)
{
    spec.validate();
    SplitMix64 rng(spec.seed);
    SynthSurface surf;
    double weighted_slope = 0;
    for (int i = 0; i < spec.components; ++i) {
        const double theta = 2 * std::numbers::pi * rng.uniform();
        const double lambda = spec.wavelength_min + (spec.wavelength_max - spec.wavelength_min) * rng.uniform();
        const double phase = 2 * std::numbers::pi * rng.uniform();
        const double weight = 0.5 + 0.5 * rng.uniform();
        const double k = 2 * std::numbers::pi / lambda;
        surf.components.push_back({weight, k * std::cos(theta), k * std::sin(theta), phase});
        weighted_slope += weight * k;
    }
    for (auto& c : surf.components) c.amplitude *= spec.slope_cap / weighted_slope;
    return surf;
}

/// Regular-grid triangulation of the synthetic heightfield over
/// [-Lx/2, Lx/2] x [-Ly/2, Ly/2], normals pointing +z.
[[nodiscard]] inline TriangleMesh gen_facet(const SynthSpec& spec)
{
    const auto surf = make_surface(spec);
    const auto nx = std::max<std::int64_t>(1, std::llround(spec.extent_x / spec.step));
    const auto ny = std::max<std::int64_t>(1, std::llround(spec.extent_y / spec.step));
    const double sx = spec.extent_x / double(nx), sy = spec.extent_y / double(ny);
    std::vector<Vec3> verts;
    verts.reserve(std::size_t((nx + 1) * (ny + 1)));
    for (std::int64_t j = 0; j <= ny; ++j)
        for (std::int64_t i = 0; i <= nx; ++i) {
            const double x = -0.5 * spec.extent_x + sx * double(i);
            const double y = -0.5 * spec.extent_y + sy * double(j);
            verts.emplace_back(x, y, surf.height(x, y));
        }
    std::vector<Face> faces;
    faces.reserve(std::size_t(2 * nx * ny));
    auto id = [nx](std::int64_t i, std::int64_t j) { return static_cast<std::uint32_t>(i + (nx + 1) * j); };
    for (std::int64_t j = 0; j < ny; ++j)
        for (std::int64_t i = 0; i < nx; ++i) {
            faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    return make_mesh(std::move(verts), std::move(faces), "synth_" + std::to_string(spec.seed));
}

struct SynthPair {
    VoxelGrid x;
    VoxelGrid y;
    VoxelGrid mask;
    SynthSurface surface;
};

/// Two fragments split by the synthetic crack inside a slab. The slab spans
/// round(L/g) voxels per axis, centered on the origin, with `pad` empty
/// voxels around it. M is the slab minus its outer voxel layer, X the mask
/// voxels with center z <= z(x, y), Y = M \ X.
[[nodiscard]] inline SynthPair gen_pair(const SynthSpec& spec, double thickness, double g, std::int64_t pad)
{
    const auto surf = make_surface(spec);
    if (!(g > 0) || pad < 0) throw ConfigError("gen_pair: invalid grid parameters");
    if (thickness < 2 * surf.amplitude_bound() + 2 * g)
        throw ConfigError("gen_pair: slab thickness " + std::to_string(thickness) + " mm cannot hold the crack range plus two voxels");
    const Dims slab{std::max<std::int64_t>(1, std::llround(spec.extent_x / g)),
                    std::max<std::int64_t>(1, std::llround(spec.extent_y / g)),
                    std::max<std::int64_t>(1, std::llround(thickness / g))};
    GridGeometry geom;
    geom.spacing = g;
    geom.dims = padded_dims(slab, pad);
    geom.origin = -0.5 * g * Vec3(double(slab.nx - 1), double(slab.ny - 1), double(slab.nz - 1)) - g * double(pad) * Vec3::Ones();

    SynthPair out{VoxelGrid(geom), VoxelGrid(geom), VoxelGrid(geom), surf};
    for (std::int64_t k = pad + 1; k < pad + slab.nz - 1; ++k)
        for (std::int64_t j = pad + 1; j < pad + slab.ny - 1; ++j)
            for (std::int64_t i = pad + 1; i < pad + slab.nx - 1; ++i) {
                const Vec3 c = geom.world({i, j, k});
                out.mask.set(i, j, k);
                if (c.z() <= surf.height(c.x(), c.y())) out.x.set(i, j, k);
                else out.y.set(i, j, k);
            }
    return out;
}

} // namespace fracmorph
