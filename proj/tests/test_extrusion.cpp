#include <gtest/gtest.h>

#include <fracmorph/extrusion.hpp>
#include <fracmorph/synth.hpp>
#include <fracmorph/voxel_grid.hpp>

using namespace fracmorph;

namespace {

TriangleMesh unit_square()
{
    return make_mesh({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0), Vec3(0, 1, 0)}, {{0, 1, 2}, {0, 2, 3}}, "square");
}

SynthSpec small_spec(std::uint64_t seed)
{
    SynthSpec s;
    s.seed = seed;
    s.extent_x = 6;
    s.extent_y = 5;
    s.step = 0.5;
    return s;
}

double projected_area(const TriangleMesh& m)
{
    double a = 0;
    for (const Face& f : m.faces) a += 0.5 * face_cross(m, f).z();
    return a;
}

} // namespace

TEST(ChooseDepth, Formula)
{
    EXPECT_NEAR(choose_depth(5, 30, 0.2), 65.8, 1e-12);
    EXPECT_NEAR(choose_depth(0, 1, 0.1), 2.4, 1e-12);
    EXPECT_GE(choose_depth(0, 7, 0.1), 14);
}

TEST(Extrude, UnitSquareBox)
{
    const auto s = extrude(unit_square(), 1);
    EXPECT_EQ(s.mesh.faces.size(), 12u);
    EXPECT_TRUE(is_watertight(s.mesh));
    EXPECT_EQ(s.top_faces.size(), 2u);
    EXPECT_EQ(s.bottom_faces.size(), 2u);
    EXPECT_EQ(s.wall_faces.size(), 8u);
    EXPECT_NEAR(signed_volume(s.mesh), 1.0, 1e-12);
}

TEST(Extrude, PartitionAndBottomCopy)
{
    const auto facet = gen_facet(small_spec(2));
    const auto s = extrude(facet, 3);
    std::vector<int> seen(s.mesh.faces.size(), 0);
    for (auto ids : {&s.top_faces, &s.bottom_faces, &s.wall_faces})
        for (auto f : *ids) ++seen[f];
    for (int c : seen) EXPECT_EQ(c, 1);
    ASSERT_EQ(s.top_faces.size(), s.bottom_faces.size());
    for (std::size_t i = 0; i < s.top_faces.size(); ++i) {
        const Face& t = s.mesh.faces[s.top_faces[i]];
        const Face& b = s.mesh.faces[s.bottom_faces[i]];
        const Vec3 nt = face_cross(s.mesh, t), nb = face_cross(s.mesh, b);
        EXPECT_LE((nt + nb).norm(), 1e-12);
        EXPECT_EQ(s.mesh.vertices[b[0]], s.mesh.vertices[t[0]] - 3 * Vec3::UnitZ());
    }
    // top surface is the facet itself
    for (std::size_t i = 0; i < facet.vertices.size(); ++i) EXPECT_EQ(s.mesh.vertices[i], facet.vertices[i]);
}

TEST(Extrude, WatertightVolumeAndNoSelfIntersection)
{
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        const auto facet = gen_facet(small_spec(seed));
        const double h = 2.5;
        const auto s = extrude(facet, h);
        EXPECT_TRUE(boundary_loops(s.mesh).empty());
        EXPECT_NEAR(signed_volume(s.mesh), h * projected_area(facet), 1e-6 * h * projected_area(facet));
        EXPECT_FALSE(find_self_intersection(s.mesh, 1000, seed).has_value());
    }
}

TEST(Extrude, Errors)
{
    EXPECT_THROW((void)extrude(unit_square(), 0), ConfigError);
    EXPECT_THROW((void)extrude(unit_square(), -1), ConfigError);
    // square annulus: 8 vertices, two boundary loops
    std::vector<Vec3> v = {Vec3(0, 0, 0), Vec3(3, 0, 0), Vec3(3, 3, 0), Vec3(0, 3, 0),
                           Vec3(1, 1, 0), Vec3(2, 1, 0), Vec3(2, 2, 0), Vec3(1, 2, 0)};
    std::vector<Face> f = {{0, 1, 5}, {0, 5, 4}, {1, 2, 6}, {1, 6, 5}, {2, 3, 7}, {2, 7, 6}, {3, 0, 4}, {3, 4, 7}};
    EXPECT_THROW((void)extrude(make_mesh(v, f), 1), TopologyError);
}

TEST(SelfIntersection, DetectsCrossingTriangles)
{
    const std::array<Vec3, 3> a{Vec3(0, 0, 0), Vec3(2, 0, 0), Vec3(0, 2, 0)};
    const std::array<Vec3, 3> b{Vec3(0.5, 0.5, -1), Vec3(0.5, 0.5, 1), Vec3(3, 3, 0.2)};
    const std::array<Vec3, 3> c{Vec3(5, 5, -1), Vec3(5, 5, 1), Vec3(6, 6, 0)};
    EXPECT_TRUE(triangles_intersect(a, b));
    EXPECT_FALSE(triangles_intersect(a, c));
}

TEST(Extrude, VoxelizedBandSpansFacetRangePlusDepth)
{
    const auto facet = gen_facet(small_spec(4));
    const double h = 2.0, g = 0.2;
    const auto s = extrude(facet, h);
    const auto box = bounds(facet);
    const auto grid = voxelize(s.mesh, g, 1);
    std::int64_t kmin = 1 << 30, kmax = -1;
    const auto d = grid.geometry().dims;
    for (std::int64_t k = 0; k < d.nz; ++k)
        for (std::int64_t j = 0; j < d.ny; ++j)
            for (std::int64_t i = 0; i < d.nx; ++i)
                if (grid.get(i, j, k)) {
                    kmin = std::min(kmin, k);
                    kmax = std::max(kmax, k);
                }
    const double extent = g * double(kmax - kmin + 1);
    const double expected = box.hi.z() - box.lo.z() + h;
    EXPECT_LE(std::abs(extent - expected), 2 * g);
}
