#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "mesh.hpp"

namespace fracmorph {

/// Watertight solid swept from a +z aligned facet: the facet itself on
/// top, a copy translated by -depth with reversed winding at the bottom,
/// and a wall of quads along the single boundary loop.
struct ExtrudedSolid {
    TriangleMesh mesh;
    std::vector<std::uint32_t> top_faces;
    std::vector<std::uint32_t> bottom_faces;
    std::vector<std::uint32_t> wall_faces;
    double depth = 0;
};

/// Extrusion depth: facet z-extent + 2 * rho_max + 4 * g. Keeps the top and
/// bottom closing fronts from meeting through the solid.
[[nodiscard]] inline double choose_depth(double facet_extent, double rho_max, double g)
{
    if (facet_extent < 0 || !(rho_max >= 0) || !(g > 0)) throw std::invalid_argument("choose_depth: invalid inputs");
    return facet_extent + 2 * rho_max + 4 * g;
}

[[nodiscard]] inline ExtrudedSolid extrude(const TriangleMesh& facet, double depth)
{
    if (!(depth > 0)) throw ConfigError("extrude: depth must be positive");
    const auto loops = boundary_loops(facet);
    if (loops.size() != 1)
        throw TopologyError("extrude: facet has " + std::to_string(loops.size()) + " boundary loops; exactly one is supported");

    const auto n = static_cast<std::uint32_t>(facet.vertices.size());
    ExtrudedSolid solid;
    solid.depth = depth;
    auto& m = solid.mesh;
    m.name = facet.name;
    m.vertices = facet.vertices;
    m.vertices.reserve(2 * n);
    for (std::uint32_t i = 0; i < n; ++i) m.vertices.push_back(facet.vertices[i] - depth * Vec3::UnitZ());

    for (const Face& f : facet.faces) {
        solid.top_faces.push_back(std::uint32_t(m.faces.size()));
        m.faces.push_back(f);
    }
    for (const Face& f : facet.faces) {
        solid.bottom_faces.push_back(std::uint32_t(m.faces.size()));
        m.faces.push_back({f[0] + n, f[2] + n, f[1] + n});
    }
    // loop edges a->b follow the top winding; the wall traverses them b->a
    const auto& loop = loops.front().vertices;
    for (std::size_t k = 0; k < loop.size(); ++k) {
        const std::uint32_t a = loop[k];
        const std::uint32_t b = loop[(k + 1) % loop.size()];
        solid.wall_faces.push_back(std::uint32_t(m.faces.size()));
        m.faces.push_back({b, a, a + n});
        solid.wall_faces.push_back(std::uint32_t(m.faces.size()));
        m.faces.push_back({b, a + n, b + n});
    }
    validate(m);
    return solid;
}

namespace detail {

// Segment pq against triangle abc (Moller-Trumbore), open interval on the segment.
inline bool segment_hits_triangle(const Vec3& p, const Vec3& q, const Vec3& a, const Vec3& b, const Vec3& c)
{
    const Vec3 dir = q - p;
    const Vec3 e1 = b - a, e2 = c - a;
    const Vec3 h = dir.cross(e2);
    const double det = e1.dot(h);
    const double scale = e1.norm() * e2.norm() * dir.norm();
    if (std::abs(det) <= 1e-12 * scale) return false; // parallel or coplanar
    const double inv = 1.0 / det;
    const Vec3 s = p - a;
    const double u = inv * s.dot(h);
    if (u < 0 || u > 1) return false;
    const Vec3 qv = s.cross(e1);
    const double v = inv * dir.dot(qv);
    if (v < 0 || u + v > 1) return false;
    const double t = inv * e2.dot(qv);
    return t > 1e-9 && t < 1 - 1e-9;
}

} // namespace detail

/// Transversal intersection between two triangles (coplanar contact is not
/// reported).
[[nodiscard]] inline bool triangles_intersect(const std::array<Vec3, 3>& t1, const std::array<Vec3, 3>& t2)
{
    for (int k = 0; k < 3; ++k) {
        if (detail::segment_hits_triangle(t1[k], t1[(k + 1) % 3], t2[0], t2[1], t2[2])) return true;
        if (detail::segment_hits_triangle(t2[k], t2[(k + 1) % 3], t1[0], t1[1], t1[2])) return true;
    }
    return false;
}

/// Tests `samples` random pairs of faces that share no vertex; returns the
/// first intersecting pair found.
[[nodiscard]] inline std::optional<std::pair<std::uint32_t, std::uint32_t>>
find_self_intersection(const TriangleMesh& m, std::size_t samples = 1000, std::uint64_t seed = 1)
{
    if (m.faces.size() < 2) return std::nullopt;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::uint32_t> pick(0, std::uint32_t(m.faces.size() - 1));
    auto corners = [&m](std::uint32_t f) {
        const Face& fc = m.faces[f];
        return std::array<Vec3, 3>{m.vertices[fc[0]], m.vertices[fc[1]], m.vertices[fc[2]]};
    };
    std::size_t tested = 0, attempts = 0;
    while (tested < samples && attempts < samples * 20) {
        ++attempts;
        const auto f1 = pick(rng), f2 = pick(rng);
        const Face& a = m.faces[f1];
        const Face& b = m.faces[f2];
        bool shared = false;
        for (auto i : a)
            for (auto j : b) shared |= i == j;
        if (shared) continue;
        ++tested;
        if (triangles_intersect(corners(f1), corners(f2))) return std::make_pair(f1, f2);
    }
    return std::nullopt;
}

} // namespace fracmorph
