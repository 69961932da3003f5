#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include <fracmorph/lipschitz.hpp>
#include <fracmorph/synth.hpp>

using namespace fracmorph;

namespace {

std::vector<Vec3> cone_ring(const Vec3& axis, double psi, int n)
{
    const Eigen::Matrix3d back = rotation_to_z(axis).transpose();
    std::vector<Vec3> out;
    for (int i = 0; i < n; ++i) {
        const double t = 2 * std::numbers::pi * i / n;
        out.push_back(back * Vec3(std::sin(psi) * std::cos(t), std::sin(psi) * std::sin(t), std::cos(psi)));
    }
    return out;
}

Vec3 random_unit(std::mt19937_64& rng)
{
    std::normal_distribution<double> n;
    return Vec3(n(rng), n(rng), n(rng)).normalized();
}

} // namespace

TEST(MinEnclosingSphere, TrivialCases)
{
    const auto one = min_enclosing_sphere({Vec3(1, 2, 3)});
    EXPECT_EQ(one.center, Vec3(1, 2, 3));
    EXPECT_EQ(one.radius, 0.0);
    const auto two = min_enclosing_sphere({Vec3(0, 0, 0), Vec3(2, 0, 0)});
    EXPECT_LE((two.center - Vec3(1, 0, 0)).norm(), 1e-12);
    EXPECT_NEAR(two.radius, 1.0, 1e-12);
}

TEST(MinEnclosingSphere, RecoversConstructedSphere)
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 20; ++trial) {
        const Vec3 c(u(rng) * 10 - 5, u(rng) * 10 - 5, u(rng) * 10 - 5);
        const double r = 0.5 + 3 * u(rng);
        std::vector<Vec3> pts;
        for (int i = 0; i < 1000; ++i) pts.push_back(c + r * std::cbrt(u(rng)) * 0.999 * random_unit(rng));
        // a regular tetrahedron on the surface pins the sphere
        const double k = 1 / std::sqrt(3.0);
        for (const Vec3& d : {Vec3(k, k, k), Vec3(k, -k, -k), Vec3(-k, k, -k), Vec3(-k, -k, k)}) pts.push_back(c + r * d);
        std::shuffle(pts.begin(), pts.end(), rng);
        const auto s = min_enclosing_sphere(pts);
        EXPECT_LE((s.center - c).norm(), 1e-9);
        EXPECT_NEAR(s.radius, r, 1e-9);
        for (const auto& p : pts) EXPECT_LE((p - s.center).norm(), s.radius + 1e-9);
    }
}

TEST(MinEnclosingSphere, DegenerateCollinearAndCoplanar)
{
    const auto line = min_enclosing_sphere({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(3, 0, 0), Vec3(2, 0, 0)});
    EXPECT_NEAR(line.radius, 1.5, 1e-12);
    std::vector<Vec3> ring;
    for (int i = 0; i < 12; ++i) ring.emplace_back(std::cos(i * std::numbers::pi / 6), std::sin(i * std::numbers::pi / 6), 0);
    const auto s = min_enclosing_sphere(ring);
    EXPECT_NEAR(s.radius, 1.0, 1e-12);
    EXPECT_LE(s.center.norm(), 1e-12);
}

TEST(FitCone, FlatFacet)
{
    const auto cone = fit_cone(std::vector<Vec3>(5, Vec3::UnitZ()));
    EXPECT_LE((cone.axis - Vec3::UnitZ()).norm(), 1e-12);
    EXPECT_EQ(cone.half_angle, 0.0);
    EXPECT_EQ(cone.slope, 0.0);
}

TEST(FitCone, ExactRing)
{
    const auto cone = fit_cone(cone_ring(Vec3::UnitZ(), std::numbers::pi / 6, 36));
    EXPECT_LE((cone.axis - Vec3::UnitZ()).norm(), 1e-6);
    EXPECT_NEAR(cone.half_angle, std::numbers::pi / 6, 1e-6);
    EXPECT_NEAR(cone.slope, std::tan(std::numbers::pi / 6), 1e-6);
    EXPECT_NEAR(cone.free_cone_half_angle(), std::numbers::pi / 3, 1e-6);
    EXPECT_NEAR(cone.slope, std::tan(cone.half_angle), 1e-12);
}

TEST(FitCone, SyntheticHeightfieldSlope)
{
    // a single dominant component attains |grad z| = cap somewhere
    SynthSpec spec;
    spec.components = 1;
    spec.slope_cap = 1;
    spec.wavelength_min = spec.wavelength_max = 6;
    spec.extent_x = spec.extent_y = 12;
    spec.step = 0.1;
    const auto cone = fit_cone(face_normals(gen_facet(spec)));
    EXPECT_NEAR(cone.slope, 1.0, 0.02);
}

TEST(FitCone, VisibilityViolation)
{
    EXPECT_THROW((void)fit_cone({Vec3::UnitZ(), -Vec3::UnitZ()}), VisibilityError);
    EXPECT_THROW((void)fit_cone({Vec3::UnitX(), Vec3::UnitY(), -Vec3::UnitX(), -Vec3::UnitY()}), VisibilityError);
    EXPECT_THROW((void)fit_cone({}), std::invalid_argument);
    EXPECT_THROW((void)fit_cone({Vec3(0, 0, 2)}), std::invalid_argument);
}

TEST(FitCone, RotationEquivariant)
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<Vec3> ns;
        for (int i = 0; i < 50; ++i) ns.push_back((Vec3::UnitZ() + 0.6 * random_unit(rng)).normalized());
        const auto base = fit_cone(ns);
        const Eigen::Matrix3d r = Eigen::AngleAxisd(2.0 * trial + 0.3, random_unit(rng)).toRotationMatrix();
        for (auto& n : ns) n = r * n;
        const auto rot = fit_cone(ns);
        EXPECT_LE((rot.axis - r * base.axis).norm(), 1e-9);
        EXPECT_NEAR(rot.half_angle, base.half_angle, 1e-9);
    }
}

TEST(FitCone, AxisBeatsSimpleCandidates)
{
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<Vec3> ns;
        for (int i = 0; i < 40; ++i) ns.push_back((Vec3(0.3, -0.2, 1) + 0.7 * random_unit(rng)).normalized());
        const auto cone = fit_cone(ns);
        auto min_dot = [&ns](const Vec3& a) {
            double m = 1;
            for (const auto& n : ns) m = std::min(m, a.dot(n));
            return m;
        };
        Vec3 mean = Vec3::Zero();
        for (const auto& n : ns) mean += n;
        const double best = min_dot(cone.axis);
        EXPECT_GE(best + 1e-12, min_dot(mean.normalized()));
        for (const auto& n : ns) EXPECT_GE(best + 1e-12, min_dot(n));
    }
}

TEST(AlignToAxis, IdentityAndQuarterTurn)
{
    const auto m = make_mesh({Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)}, {{0, 1, 2}});
    LipschitzCone z;
    EXPECT_EQ(align_to_axis(m, z).vertices, m.vertices);
    LipschitzCone x;
    x.axis = Vec3::UnitX();
    const auto a = align_to_axis(m, x);
    EXPECT_LE((a.vertices[0] - Vec3(0, 0, 1)).norm(), 1e-12);
    // rotation about x cross z = -y leaves y fixed
    EXPECT_LE((a.vertices[1] - Vec3(0, 1, 0)).norm(), 1e-12);
}

TEST(AlignToAxis, RigidForRandomAxes)
{
    std::mt19937_64 rng(13);
    std::vector<Vec3> v;
    for (int i = 0; i < 30; ++i) v.push_back(5 * random_unit(rng));
    const auto m = make_mesh(v, {{0, 1, 2}});
    for (int trial = 0; trial < 10; ++trial) {
        LipschitzCone c;
        c.axis = random_unit(rng);
        const auto a = align_to_axis(m, c);
        EXPECT_LE((rotation_to_z(c.axis) * c.axis - Vec3::UnitZ()).norm(), 1e-12);
        for (std::size_t i = 0; i < v.size(); ++i)
            for (std::size_t j = i + 1; j < v.size(); ++j)
                EXPECT_NEAR((a.vertices[i] - a.vertices[j]).norm(), (v[i] - v[j]).norm(), 1e-9);
    }
    LipschitzCone down;
    down.axis = -Vec3::UnitZ();
    EXPECT_LE((rotation_to_z(down.axis) * down.axis - Vec3::UnitZ()).norm(), 1e-12);
}

TEST(VerifyLipschitz, PlaneAndRamp)
{
    std::vector<Vec3> v;
    for (int i = 0; i <= 4; ++i)
        for (int j = 0; j <= 4; ++j) v.emplace_back(i, j, 0);
    auto m = make_mesh(v, {{0, 1, 6}});
    EXPECT_TRUE(verify_lipschitz(m, 0).holds);
    for (auto& p : m.vertices) p.z() = p.x();
    const auto r = verify_lipschitz(m, 0.5);
    EXPECT_FALSE(r.holds);
    EXPECT_EQ(std::abs(m.vertices[r.first].x() - m.vertices[r.second].x()), 4.0);
    EXPECT_NEAR(r.excess, 2.0, 1e-12);
}

TEST(VerifyLipschitz, AlignedSynthFacetsHoldAtFittedSlope)
{
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SynthSpec spec;
        spec.seed = seed;
        spec.extent_x = spec.extent_y = 8;
        spec.step = 0.4;
        // tilt the facet so alignment has real work to do
        const Eigen::Matrix3d tilt = Eigen::AngleAxisd(0.4, Vec3(1, 2, 0).normalized()).toRotationMatrix();
        const auto m = transformed(gen_facet(spec), tilt);
        const auto cone = fit_cone(face_normals(m));
        EXPECT_TRUE(verify_lipschitz(align_to_axis(m, cone), cone.slope).holds) << seed;
    }
}
