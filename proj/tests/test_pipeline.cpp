#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include <fracmorph/pipeline.hpp>

using namespace fracmorph;
namespace fs = std::filesystem;

namespace {

/// Fresh scratch directory per test, removed afterwards.
class Scratch {
public:
    explicit Scratch(const std::string& tag)
        : dir_(fs::temp_directory_path() / ("fracmorph_" + tag + "_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed())))
    {
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    ~Scratch() { fs::remove_all(dir_); }
    [[nodiscard]] std::string path(const std::string& name) const { return (dir_ / name).string(); }

private:
    fs::path dir_;
};

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::string write_synth(const Scratch& s, std::uint64_t seed, double extent)
{
    SynthSpec spec;
    spec.seed = seed;
    spec.extent_x = spec.extent_y = extent;
    const auto path = s.path("facet_" + std::to_string(seed) + ".obj");
    save_mesh(path, gen_facet(spec));
    return path;
}

/// Flat rectangle [0, w] x [0, h] at z = 0, n x n quads.
TriangleMesh flat_facet(double w, double h, int n)
{
    std::vector<Vec3> v;
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i) v.emplace_back(w * i / n, h * j / n, 0);
    std::vector<Face> f;
    auto id = [n](int i, int j) { return std::uint32_t(i + (n + 1) * j); };
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            f.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            f.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    return make_mesh(v, f, "flat");
}

int run_cli(const std::string& args)
{
    const std::string cmd = std::string("\"") + FRACMORPH_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST(PipelineConfig, RejectsBadLaddersBeforeAnyWork)
{
    Scratch s("cfg");
    PipelineConfig cfg;
    cfg.input = s.path("missing.obj"); // never opened
    cfg.output_dir = s.path("out");
    cfg.scales = {2, 1};
    EXPECT_THROW((void)run_pipeline(cfg), ConfigError);
    cfg.scales = {1, 1};
    EXPECT_THROW((void)run_pipeline(cfg), ConfigError);
    cfg.scales = {1, 2};
    cfg.g = 0;
    EXPECT_THROW((void)run_pipeline(cfg), ConfigError);
    cfg.g = 0.2;
    cfg.depth = -1;
    EXPECT_THROW((void)run_pipeline(cfg), ConfigError);
    EXPECT_FALSE(fs::exists(s.path("out")));
}

TEST(PipelinePlan, WorkedExampleGridArithmetic)
{
    // 23.8 x 64.6 mm flat facet extruded 5.8 mm: tight grid 119 x 323 x 29
    const auto plan = plan_grid(flat_facet(23.8, 64.6, 8), 0.2, 30, 5.8);
    EXPECT_EQ(plan.tight, (Dims{119, 323, 29}));
    EXPECT_EQ(plan.pad, 151);
    EXPECT_EQ(plan.padded, (Dims{421, 625, 331}));
}

TEST(PipelinePlan, DryRunManifestRecordsWorkedExampleGrid)
{
    Scratch s("plan");
    save_mesh(s.path("flat.obj"), flat_facet(23.8, 64.6, 8));
    PipelineConfig cfg;
    cfg.input = s.path("flat.obj");
    cfg.output_dir = s.path("out");
    cfg.depth = 5.8;
    const auto plan = plan_pipeline(cfg);
    EXPECT_EQ(plan["grid"]["padding"], 151);
    EXPECT_EQ(plan["grid"]["dims"], Json::array({421, 625, 331}));
    EXPECT_EQ(plan["grid"]["tight_dims"], Json::array({119, 323, 29}));
    EXPECT_FALSE(fs::exists(s.path("out")));
}

TEST(Pipeline, DefaultLadderWritesTwelveSurfaces)
{
    Scratch s("default");
    PipelineConfig cfg;
    cfg.input = write_synth(s, 5, 6);
    cfg.g = 0.5; // default ladder, coarse grid to keep the test fast
    cfg.output_dir = s.path("out");
    const auto m = run_pipeline(cfg);

    int objs = 0;
    for (const auto& e : fs::directory_iterator(cfg.output_dir)) objs += e.path().extension() == ".obj";
    EXPECT_EQ(objs, 12);
    ASSERT_EQ(m["scales"].size(), 6u);
    for (const auto& sc : m["scales"]) {
        EXPECT_TRUE(fs::exists(fs::path(cfg.output_dir) / sc["closing_obj"].get<std::string>()));
        EXPECT_TRUE(fs::exists(fs::path(cfg.output_dir) / sc["opening_obj"].get<std::string>()));
        EXPECT_TRUE(fs::exists(fs::path(cfg.output_dir) / sc["reliability"]["closing"]["pgm"].get<std::string>()));
    }
    EXPECT_EQ(m["scales"][0]["closing_obj"], "facet_5_close_1.obj");
    EXPECT_EQ(m["grid"]["padding"], required_padding(30, 0.5));
    EXPECT_DOUBLE_EQ(m["grid"]["discretization_bound"].get<double>(), discretization_bound(0.5));
    for (const char* stage : {"load", "lipschitz", "align", "extrude_voxelize", "scale_space", "surfaces", "total"})
        EXPECT_TRUE(m["timings_s"].contains(stage)) << stage;

    // the manifest on disk matches the returned one apart from formatting
    const auto on_disk = Json::parse(slurp(s.path("out/manifest.json")));
    EXPECT_EQ(on_disk["grid"], m["grid"]);
}

TEST(Pipeline, ManifestRerunIsBitExact)
{
    Scratch s("rerun");
    PipelineConfig cfg;
    cfg.input = write_synth(s, 9, 5);
    cfg.scales = {0.4, 1};
    cfg.output_dir = s.path("a");
    const auto first = run_pipeline(cfg);

    auto again = config_from_json(Json::parse(slurp(s.path("a/manifest.json"))));
    again.output_dir = s.path("b");
    again.threads = 3; // thread count must not change any payload
    const auto second = run_pipeline(again);
    ASSERT_EQ(first["outputs"], second["outputs"]);
    for (const auto& f : first["outputs"]) {
        const auto name = f.get<std::string>();
        EXPECT_EQ(slurp(s.path("a/" + name)), slurp(s.path("b/" + name))) << name;
    }
}

TEST(Pipeline, OpeningMeshSitsOnTheFacet)
{
    // flat facet: closing and lifted opening both coincide with the plane up
    // to the voxel half-height convention
    Scratch s("flat");
    save_mesh(s.path("flat.obj"), flat_facet(4, 4, 4));
    PipelineConfig cfg;
    cfg.input = s.path("flat.obj");
    cfg.scales = {0.4};
    cfg.output_dir = s.path("out");
    cfg.reliability = false;
    (void)run_pipeline(cfg);
    for (const char* name : {"out/flat_close_0.4.obj", "out/flat_open_0.4.obj"}) {
        const auto m = load_mesh(s.path(name));
        ASSERT_FALSE(m.vertices.empty());
        for (const auto& v : m.vertices) EXPECT_LE(std::abs(v.z()), 0.2 + 1e-9) << name;
    }
}

TEST(Pipeline, FailureRemovesPartialOutputs)
{
    Scratch s("partial");
    PipelineConfig cfg;
    cfg.input = write_synth(s, 2, 4);
    cfg.scales = {0.4, 1};
    cfg.output_dir = s.path("out");
    cfg.reliability = false;
    // a directory squatting on the second scale's file name makes that write fail
    fs::create_directories(s.path("out/facet_2_close_1.obj"));
    try {
        (void)run_pipeline(cfg);
        FAIL() << "expected a write failure";
    }
    catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::resource);
        EXPECT_NE(std::string(e.what()).find("surfaces"), std::string::npos) << e.what();
    }
    EXPECT_FALSE(fs::exists(s.path("out/facet_2_close_0.4.obj")));
    EXPECT_FALSE(fs::exists(s.path("out/facet_2_open_0.4.obj")));
    EXPECT_FALSE(fs::exists(s.path("out/manifest.json")));
    EXPECT_TRUE(fs::is_directory(s.path("out/facet_2_close_1.obj"))); // not ours to delete
}

TEST(Pipeline, StageErrorsKeepTheirClass)
{
    Scratch s("stage");
    // a closed tetrahedron has normals in every direction
    save_mesh(s.path("tet.obj"), make_mesh({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)},
                                           {{0, 2, 1}, {0, 1, 3}, {0, 3, 2}, {1, 2, 3}}, "tet"));
    PipelineConfig cfg;
    cfg.input = s.path("tet.obj");
    cfg.output_dir = s.path("out");
    try {
        (void)run_pipeline(cfg);
        FAIL() << "expected a visibility error";
    }
    catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::data);
        EXPECT_EQ(std::string(e.what()).rfind("lipschitz: ", 0), 0u) << e.what();
    }
}

TEST(Bench, CsvHasOneRowPerInstanceAndSkipsOverCap)
{
    BenchConfig cfg;
    cfg.edt_sizes = {16, 32};
    cfg.surfaces = false;
    cfg.voxel_cap = 20000; // 32^3 and the 10K-face embed grid are over the cap
    const auto rows = bench(cfg);
    std::ostringstream csv;
    write_bench_csv(csv, rows);
    const auto text = csv.str();
    EXPECT_EQ(text.rfind("stage,instance,voxels,seconds,budget_s,within_budget,status,note\n", 0), 0u);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_TRUE(rows[0].skipped);
    EXPECT_FALSE(rows[1].skipped);
    EXPECT_FALSE(rows[1].within_budget().has_value()); // no budget for 16^3
    EXPECT_TRUE(rows[2].skipped);
    EXPECT_NE(text.find("skipped"), std::string::npos);
}

TEST(Bench, TenThousandFaceRow)
{
    BenchConfig cfg;
    cfg.edt_sizes = {};
    cfg.surfaces = false;
    const auto rows = bench(cfg);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].stage, "lipschitz_extrude_embed");
    EXPECT_EQ(rows[0].instance.rfind("10082 faces", 0), 0u) << rows[0].instance;
    EXPECT_EQ(rows[0].budget, 2.0);
}

// ---------------------------------------------------------------------------
// CLI

TEST(Cli, ExitCodes)
{
    Scratch s("cli");
    const auto facet = write_synth(s, 4, 4);
    EXPECT_EQ(run_cli("pipeline " + facet + " --scales 0.4,1 --out-dir " + s.path("ok")), 0);
    EXPECT_TRUE(fs::exists(s.path("ok/manifest.json")));
    EXPECT_EQ(run_cli("pipeline " + facet + " --scales 1,0.4 --out-dir " + s.path("bad")), 2);
    EXPECT_EQ(run_cli("pipeline " + facet + " --no-such-flag"), 2);
    EXPECT_EQ(run_cli("nosuchcommand"), 2);
    EXPECT_EQ(run_cli("pipeline " + s.path("missing.obj") + " --out-dir " + s.path("bad")), 3);
    EXPECT_EQ(run_cli("pipeline " + facet + " --voxel-cap 1000 --out-dir " + s.path("bad")), 4);
    EXPECT_FALSE(fs::exists(s.path("bad")));
    EXPECT_EQ(run_cli("extrude " + facet + " --depth abc -o " + s.path("x.obj")), 2);
}

TEST(Cli, SynthThenCheckReportsComplementarity)
{
    Scratch s("check");
    ASSERT_EQ(run_cli("synth --seed 7 --extent-x 6 --extent-y 6 --thickness 6 --out-dir " + s.path("s")), 0);
    for (const char* f : {"s/synth_7.obj", "s/synth_7_x.vgrid", "s/synth_7_y.vgrid", "s/synth_7_mask.vgrid"})
        EXPECT_TRUE(fs::exists(s.path(f))) << f;
    ASSERT_EQ(run_cli("check --x " + s.path("s/synth_7_x.vgrid") + " --y " + s.path("s/synth_7_y.vgrid") + " --mask " +
                      s.path("s/synth_7_mask.vgrid") + " --scales 0,0.4,1 -o " + s.path("report.json")),
              0);
    const auto report = Json::parse(slurp(s.path("report.json")));
    ASSERT_EQ(report.size(), 5u); // raw pair plus two pairings per positive scale
    for (const auto& r : report) {
        EXPECT_EQ(r["overlap"], 0);
        EXPECT_EQ(r["gap"], 0);
        EXPECT_TRUE(r["complementary"].get<bool>()) << r.dump();
    }
}

TEST(Cli, StagewiseCommandsChain)
{
    Scratch s("chain");
    const auto facet = write_synth(s, 8, 4);
    EXPECT_EQ(run_cli("lipschitz " + facet + " -o " + s.path("lip.json")), 0);
    const auto lip = Json::parse(slurp(s.path("lip.json")));
    EXPECT_TRUE(lip["visible"].get<bool>());
    EXPECT_EQ(lip["axis"].size(), 3u);

    ASSERT_EQ(run_cli("extrude " + facet + " --depth 3 -o " + s.path("solid.obj")), 0);
    EXPECT_TRUE(is_watertight(load_mesh(s.path("solid.obj"))));
    ASSERT_EQ(run_cli("voxelize " + s.path("solid.obj") + " --g 0.2 --rho-max 1 -o " + s.path("solid.vgrid")), 0);
    const auto grid = load_vgrid(s.path("solid.vgrid"));
    EXPECT_GT(grid.count(), 0);

    ASSERT_EQ(run_cli("edt " + s.path("solid.vgrid") + " -o " + s.path("d.dfld") + " --prov " + s.path("p.prov")), 0);
    std::ifstream din(s.path("d.dfld"), std::ios::binary);
    const auto field = read_dfld(din);
    EXPECT_EQ(field.geometry, grid.geometry());

    ASSERT_EQ(run_cli("scalespace " + s.path("solid.vgrid") + " --scales 0.4,1 --g 0.2 --out-dir " + s.path("ss")), 0);
    EXPECT_EQ(run_cli("scalespace " + s.path("solid.vgrid") + " --scales 0.4,1 --g 0.3 --out-dir " + s.path("ss2")), 2);
    const auto closed = load_vgrid(s.path("ss/solid_close_1.vgrid"));
    EXPECT_TRUE(grid.is_subset_of(closed));

    ASSERT_EQ(run_cli("surfaces " + s.path("ss/solid_close_1.vgrid") + " --rho 1 --depth 3 --name solid --source " +
                      s.path("solid.vgrid") + " --out-dir " + s.path("srf")),
              0);
    for (const char* f : {"srf/solid_close_1.obj", "srf/solid_open_1.obj", "srf/solid_close_1_reliability.pgm"})
        EXPECT_TRUE(fs::exists(s.path(f))) << f;
    EXPECT_EQ(slurp(s.path("srf/solid_close_1_reliability.pgm")).rfind("P5\n", 0), 0u);
}

TEST(Cli, BenchWritesCsv)
{
    Scratch s("bench");
    ASSERT_EQ(run_cli("bench --sizes 16 --no-surfaces -o " + s.path("b.csv")), 0);
    const auto csv = slurp(s.path("b.csv"));
    EXPECT_NE(csv.find("edt,\"16^3\",4096,"), std::string::npos) << csv;
}
