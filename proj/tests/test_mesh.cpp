#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include <fracmorph/mesh.hpp>
#include <fracmorph/synth.hpp>

using namespace fracmorph;

namespace {

TriangleMesh parse(const std::string& text) {
    std::istringstream in(text);
    return parse_obj(in);
}

TriangleMesh tetrahedron()
{
    return make_mesh({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)},
                     {{0, 2, 1}, {0, 1, 3}, {0, 3, 2}, {1, 2, 3}});
}

/// n x n quads, each split into two triangles.
TriangleMesh grid_patch(int n)
{
    std::vector<Vec3> v;
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i) v.emplace_back(i, j, 0);
    std::vector<Face> f;
    auto id = [n](int i, int j) { return std::uint32_t(i + (n + 1) * j); };
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            f.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            f.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    return make_mesh(v, f);
}

} // namespace

TEST(LoadMesh, SmallestValidMesh)
{
    const auto m = parse("# tri\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1 2 3\n");
    EXPECT_EQ(m.vertices.size(), 3u);
    EXPECT_EQ(m.faces.size(), 1u);
}

TEST(LoadMesh, SlashedAndNegativeIndices)
{
    const auto m = parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1/1 2//2 -1\n");
    EXPECT_EQ(m.faces[0], (Face{0, 1, 2}));
}

TEST(LoadMesh, IndexOutOfRange)
{
    EXPECT_THROW(parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n"), ParseError);
}

TEST(LoadMesh, MalformedRecords)
{
    EXPECT_THROW(parse("v 0 0\n"), ParseError);
    EXPECT_THROW(parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 x 3\n"), ParseError);
    EXPECT_THROW(parse("v 0 0 0\nv 1 0 0\nf 1 2\n"), ParseError);
}

TEST(LoadMesh, DegenerateFaceRejected)
{
    EXPECT_THROW(parse("v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n"), DegenerateFaceError);
}

TEST(LoadMesh, NonManifoldEdgeRejected)
{
    // three faces on edge 1-2
    EXPECT_THROW(parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 -1 0\nv 0 0 1\nf 1 2 3\nf 2 1 4\nf 1 2 5\n"), TopologyError);
}

TEST(LoadMesh, LargeFacetPassesInvariants)
{
    // 76 x 76 samples: 5776 vertices and 11250 faces
    SynthSpec spec;
    spec.extent_x = spec.extent_y = 18.75;
    spec.step = 0.25;
    const auto m = gen_facet(spec);
    EXPECT_NEAR(double(m.vertices.size()), 5800, 100);
    EXPECT_NEAR(double(m.faces.size()), 11000, 300);
    std::stringstream s;
    write_obj(s, m);
    const auto back = parse_obj(s);
    EXPECT_EQ(back.faces, m.faces);
}

TEST(SaveMesh, RoundTripIsIdempotentAtSerializedPrecision)
{
    SynthSpec spec;
    spec.seed = 3;
    spec.extent_x = spec.extent_y = 4;
    const auto m = gen_facet(spec);
    std::stringstream s1;
    write_obj(s1, m);
    const auto once = parse_obj(s1);
    std::stringstream s2;
    write_obj(s2, once);
    const auto twice = parse_obj(s2);
    ASSERT_EQ(once.vertices.size(), twice.vertices.size());
    for (std::size_t i = 0; i < once.vertices.size(); ++i) EXPECT_EQ(once.vertices[i], twice.vertices[i]);
    for (std::size_t i = 0; i < m.vertices.size(); ++i) EXPECT_LE((once.vertices[i] - m.vertices[i]).norm(), 1e-7);
}

TEST(FaceNormals, AxisAlignedAndFlipped)
{
    const auto up = make_mesh({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)}, {{0, 1, 2}});
    const auto down = make_mesh({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)}, {{0, 2, 1}});
    EXPECT_EQ(face_normals(up)[0], Vec3(0, 0, 1));
    EXPECT_EQ(face_normals(down)[0], Vec3(0, 0, -1));
}

TEST(FaceNormals, PlanarHeightfieldMatchesAnalyticGradient)
{
    // z = x / 2: normal is (-dz/dx, -dz/dy, 1) normalised = (-1, 0, 2) / sqrt(5)
    auto m = grid_patch(6);
    for (auto& v : m.vertices) v.z() = v.x() / 2;
    const Vec3 expected = Vec3(-1, 0, 2) / std::sqrt(5.0);
    for (const auto& n : face_normals(m)) {
        EXPECT_NEAR(n.norm(), 1.0, 1e-12);
        EXPECT_LE((n - expected).norm(), 1e-12);
    }
}

TEST(BoundaryLoops, Basics)
{
    EXPECT_TRUE(boundary_loops(tetrahedron()).empty());
    const auto tri = make_mesh({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)}, {{0, 1, 2}});
    const auto loops = boundary_loops(tri);
    ASSERT_EQ(loops.size(), 1u);
    EXPECT_EQ(loops[0].length(), 3u);
}

TEST(BoundaryLoops, GridPatchPerimeter)
{
    const auto loops = boundary_loops(grid_patch(10));
    ASSERT_EQ(loops.size(), 1u);
    EXPECT_EQ(loops[0].length(), 40u);
}

TEST(BoundaryLoops, BowtieVertexRejected)
{
    // two triangles touching at a single vertex
    const auto m = make_mesh({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(-1, 0, 0), Vec3(0, -1, 0)},
                             {{0, 1, 2}, {0, 3, 4}});
    EXPECT_THROW((void)boundary_loops(m), TopologyError);
}

TEST(MeshProperties, AreaWeightedNormalsCancelOnClosedMesh)
{
    const auto t = tetrahedron();
    Vec3 sum = Vec3::Zero();
    for (const Face& f : t.faces) sum += face_cross(t, f);
    EXPECT_LE(sum.norm(), 1e-9 * surface_area(t));
    EXPECT_NEAR(signed_volume(t), 1.0 / 6.0, 1e-15);
}
