#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"

namespace fracmorph {

using Face = std::array<std::uint32_t, 3>;

/// Indexed triangle surface in millimetres. Instances produced by
/// make_mesh() or load_obj() satisfy the index, area and winding invariants.
struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
    std::string name;
};

/// Ordered cycle of vertex indices along edges used by exactly one face.
struct BoundaryLoop {
    std::vector<std::uint32_t> vertices;
    [[nodiscard]] std::size_t length() const noexcept { return vertices.size(); }
};

inline constexpr double kDegenerateArea = 1e-12;

[[nodiscard]] inline Vec3 face_cross(const TriangleMesh& m, const Face& f)
{
    const Vec3& a = m.vertices[f[0]];
    return (m.vertices[f[1]] - a).cross(m.vertices[f[2]] - a);
}

[[nodiscard]] inline double face_area(const TriangleMesh& m, const Face& f) { return 0.5 * face_cross(m, f).norm(); }

namespace detail {

inline std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) { return (std::uint64_t{a} << 32) | b; }

/// Directed edge -> owning face count; used by both validation and loop extraction.
inline std::map<std::uint64_t, int> directed_edges(const TriangleMesh& m)
{
    std::map<std::uint64_t, int> edges;
    for (const Face& f : m.faces)
        for (int k = 0; k < 3; ++k) ++edges[edge_key(f[k], f[(k + 1) % 3])];
    return edges;
}

} // namespace detail

/// Checks every mesh invariant; throws the matching error type on failure.
inline void validate(const TriangleMesh& m)
{
    const auto nv = m.vertices.size();
    for (std::size_t i = 0; i < m.faces.size(); ++i) {
        const Face& f = m.faces[i];
        for (auto idx : f)
            if (idx >= nv)
                throw ParseError("face " + std::to_string(i) + " references vertex " + std::to_string(idx + 1) +
                                 " of " + std::to_string(nv));
        if (face_area(m, f) < kDegenerateArea)
            throw DegenerateFaceError("face " + std::to_string(i) + " has zero area");
    }
    const auto edges = detail::directed_edges(m);
    for (const auto& [key, count] : edges) {
        const auto a = static_cast<std::uint32_t>(key >> 32);
        const auto b = static_cast<std::uint32_t>(key & 0xffffffffu);
        // three or more faces on one edge always repeat a direction
        if (count > 1)
            throw TopologyError("edge " + std::to_string(a) + "-" + std::to_string(b) +
                                " is used twice in the same direction (inconsistent winding or non-manifold)");
    }
}

[[nodiscard]] inline TriangleMesh make_mesh(std::vector<Vec3> vertices, std::vector<Face> faces, std::string name = {})
{
    TriangleMesh m{std::move(vertices), std::move(faces), std::move(name)};
    validate(m);
    return m;
}

/// Reads v/f records of an ASCII OBJ; any other record is ignored. Face
/// records with more than three corners are fan-triangulated.
[[nodiscard]] inline TriangleMesh parse_obj(std::istream& in, std::string name = {})
{
    std::vector<Vec3> verts;
    std::vector<Face> faces;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;
        if (tag == "v") {
            double x, y, z;
            if (!(ls >> x >> y >> z)) throw ParseError("line " + std::to_string(lineno) + ": malformed vertex");
            verts.emplace_back(x, y, z);
        }
        else if (tag == "f") {
            std::vector<std::uint32_t> corners;
            std::string tok;
            while (ls >> tok) {
                // keep only the position index of "v/vt/vn"
                const auto slash = tok.find('/');
                const std::string head = tok.substr(0, slash);
                long idx = 0;
                try {
                    std::size_t used = 0;
                    idx = std::stol(head, &used);
                    if (used != head.size()) throw std::invalid_argument(head);
                }
                catch (const std::exception&) {
                    throw ParseError("line " + std::to_string(lineno) + ": malformed face index '" + tok + "'");
                }
                if (idx < 0) idx = static_cast<long>(verts.size()) + idx + 1;
                if (idx <= 0) throw ParseError("line " + std::to_string(lineno) + ": face index out of range");
                corners.push_back(static_cast<std::uint32_t>(idx - 1));
            }
            if (corners.size() < 3) throw ParseError("line " + std::to_string(lineno) + ": face with fewer than 3 corners");
            for (std::size_t k = 1; k + 1 < corners.size(); ++k) faces.push_back({corners[0], corners[k], corners[k + 1]});
        }
    }
    return make_mesh(std::move(verts), std::move(faces), std::move(name));
}

[[nodiscard]] inline TriangleMesh load_mesh(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    auto stem = path.substr(path.find_last_of('/') + 1);
    stem = stem.substr(0, stem.rfind('.'));
    return parse_obj(in, stem);
}

inline void write_obj(std::ostream& out, const TriangleMesh& m)
{
    char buf[96];
    if (!m.name.empty()) out << "o " << m.name << '\n';
    for (const Vec3& v : m.vertices) {
        std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", v.x(), v.y(), v.z());
        out << buf;
    }
    for (const Face& f : m.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

inline void save_mesh(const std::string& path, const TriangleMesh& m)
{
    std::ofstream out(path);
    if (!out) throw ResourceError("cannot write " + path);
    write_obj(out, m);
}

/// Unit normals, right-hand rule from the winding.
[[nodiscard]] inline std::vector<Vec3> face_normals(const TriangleMesh& m)
{
    std::vector<Vec3> normals;
    normals.reserve(m.faces.size());
    for (const Face& f : m.faces) normals.push_back(face_cross(m, f).normalized());
    return normals;
}

[[nodiscard]] inline double surface_area(const TriangleMesh& m)
{
    double a = 0;
    for (const Face& f : m.faces) a += face_area(m, f);
    return a;
}

/// Divergence-theorem volume; positive for outward-oriented closed meshes.
[[nodiscard]] inline double signed_volume(const TriangleMesh& m)
{
    double v = 0;
    for (const Face& f : m.faces)
        v += m.vertices[f[0]].dot(m.vertices[f[1]].cross(m.vertices[f[2]]));
    return v / 6.0;
}

/// Groups edges used by exactly one face into closed cycles, following each
/// face's winding. A watertight mesh yields no loops.
[[nodiscard]] inline std::vector<BoundaryLoop> boundary_loops(const TriangleMesh& m)
{
    const auto edges = detail::directed_edges(m);
    std::map<std::uint32_t, std::vector<std::uint32_t>> next;
    for (const auto& [key, count] : edges) {
        const auto a = static_cast<std::uint32_t>(key >> 32);
        const auto b = static_cast<std::uint32_t>(key & 0xffffffffu);
        if (edges.count(detail::edge_key(b, a))) continue;
        next[a].push_back(b);
    }
    for (const auto& [v, out] : next)
        if (out.size() > 1)
            throw TopologyError("boundary vertex " + std::to_string(v) + " has more than two boundary edges");

    std::vector<BoundaryLoop> loops;
    while (!next.empty()) {
        BoundaryLoop loop;
        const std::uint32_t start = next.begin()->first;
        std::uint32_t cur = start;
        do {
            auto it = next.find(cur);
            if (it == next.end()) throw TopologyError("open boundary chain at vertex " + std::to_string(cur));
            loop.vertices.push_back(cur);
            const std::uint32_t nxt = it->second.front();
            next.erase(it);
            cur = nxt;
        } while (cur != start);
        loops.push_back(std::move(loop));
    }
    return loops;
}

[[nodiscard]] inline bool is_watertight(const TriangleMesh& m) { return boundary_loops(m).empty(); }

struct Aabb {
    Vec3 lo{Vec3::Constant(std::numeric_limits<double>::infinity())};
    Vec3 hi{Vec3::Constant(-std::numeric_limits<double>::infinity())};
};

[[nodiscard]] inline Aabb bounds(const TriangleMesh& m)
{
    Aabb box;
    for (const Vec3& v : m.vertices) {
        box.lo = box.lo.cwiseMin(v);
        box.hi = box.hi.cwiseMax(v);
    }
    return box;
}

} // namespace fracmorph
