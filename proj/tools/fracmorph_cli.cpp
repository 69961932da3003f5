#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <fracmorph/fracmorph.hpp>

using namespace fracmorph;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kInternal = 1, kConfig = 2, kData = 3, kResource = 4 };

int exit_code(ErrorKind k)
{
    switch (k) {
    case ErrorKind::config: return kConfig;
    case ErrorKind::data: return kData;
    case ErrorKind::resource: return kResource;
    }
    return kInternal;
}

void emit_json(const Json& j, const std::string& path)
{
    if (path.empty() || path == "-") {
        std::cout << j.dump(2) << '\n';
        return;
    }
    std::ofstream out(path);
    if (!out) throw ResourceError("cannot write " + path);
    out << j.dump(2) << '\n';
}

std::string stem_of(const std::string& path)
{
    auto s = fs::path(path).stem().string();
    return s.empty() ? "grid" : s;
}

void ensure_dir(const std::string& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ResourceError("cannot create directory " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

Json report_json(const ComplementarityReport& r)
{
    return {{"rho", r.rho},
            {"pair", r.pair},
            {"overlap", r.overlap_count},
            {"gap", r.gap_count},
            {"eroded_mask_size", r.eroded_mask_size},
            {"max_penetration", r.max_penetration},
            {"empty_mask", r.empty_mask},
            {"complementary", r.complementary()}};
}

/// Rejects a --g that disagrees with the grid it is meant to describe.
void check_spacing(const std::optional<double>& g, const VoxelGrid& grid)
{
    if (g && std::abs(*g - grid.spacing()) > 1e-12 * std::max(1.0, *g))
        throw ConfigError("--g " + std::to_string(*g) + " does not match the grid spacing " + std::to_string(grid.spacing()));
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Multi-scale morphological simplification of fracture facets"};
    app.require_subcommand(1);
    app.fallthrough();
    unsigned threads = 1;
    app.add_option("--threads", threads, "Worker threads; outputs do not depend on it")->check(CLI::PositiveNumber);

    std::function<void()> action;

    // lipschitz -------------------------------------------------------------
    auto* lip = app.add_subcommand("lipschitz", "Fit the normal cone of a facet and report its Lipschitz slope");
    std::string lip_in, lip_out;
    bool lip_verify = false;
    lip->add_option("input", lip_in, "Facet OBJ")->required();
    lip->add_option("-o,--out", lip_out, "JSON report path (stdout when omitted)");
    lip->add_flag("--verify", lip_verify, "Also check the pairwise vertex slope after alignment");
    lip->callback([&] {
        action = [&] {
            const auto mesh = load_mesh(lip_in);
            Json report;
            try {
                const auto cone = fit_cone(face_normals(mesh));
                report = lipschitz_json(cone);
                if (lip_verify) {
                    const auto chk = verify_lipschitz(align_to_axis(mesh, cone), cone.slope);
                    report["verified"] = chk.holds;
                    report["worst_excess"] = chk.excess;
                    report["vertices_sampled"] = chk.sampled;
                }
            }
            catch (const VisibilityError& e) {
                report = {{"axis", nullptr}, {"half_angle_rad", nullptr}, {"slope", nullptr}, {"visible", false}, {"reason", e.what()}};
                emit_json(report, lip_out);
                throw;
            }
            emit_json(report, lip_out);
        };
    });

    // extrude ---------------------------------------------------------------
    auto* ext = app.add_subcommand("extrude", "Align a facet to its cone axis and extrude it into a watertight solid");
    std::string ext_in, ext_out, ext_depth = "auto";
    double ext_g = 0.2, ext_rho = 30;
    ext->add_option("input", ext_in, "Facet OBJ")->required();
    ext->add_option("-o,--out", ext_out, "Solid OBJ")->required();
    ext->add_option("--depth", ext_depth, "auto or a depth in mm")->capture_default_str();
    ext->add_option("--g", ext_g, "Grid spacing used by the auto depth rule (mm)")->capture_default_str();
    ext->add_option("--rho-max", ext_rho, "Largest scale used by the auto depth rule (mm)")->capture_default_str();
    ext->callback([&] {
        action = [&] {
            double depth = 0;
            const bool automatic = ext_depth == "auto";
            if (!automatic) {
                try {
                    std::size_t used = 0;
                    depth = std::stod(ext_depth, &used);
                    if (used != ext_depth.size()) throw std::invalid_argument(ext_depth);
                }
                catch (const std::exception&) {
                    throw ConfigError("--depth must be 'auto' or a number, got '" + ext_depth + "'");
                }
            }
            const auto mesh = load_mesh(ext_in);
            const auto cone = fit_cone(face_normals(mesh));
            const auto aligned = align_to_axis(mesh, cone);
            if (automatic) {
                const auto box = bounds(aligned);
                depth = choose_depth(box.hi.z() - box.lo.z(), ext_rho, ext_g);
            }
            const auto solid = extrude(aligned, depth);
            save_mesh(ext_out, solid.mesh);
            emit_json({{"depth", depth}, {"vertices", solid.mesh.vertices.size()}, {"faces", solid.mesh.faces.size()},
                       {"axis", vec_json(cone.axis)}},
                      "");
        };
    });

    // voxelize --------------------------------------------------------------
    auto* vox = app.add_subcommand("voxelize", "Voxelize a watertight solid into a padded VGRID1 grid");
    std::string vox_in, vox_out;
    double vox_g = 0.2;
    std::optional<std::int64_t> vox_pad;
    std::optional<double> vox_rho;
    std::int64_t vox_cap = kDefaultVoxelCap;
    vox->add_option("input", vox_in, "Solid OBJ")->required();
    vox->add_option("-o,--out", vox_out, "VGRID1 output")->required();
    vox->add_option("--g", vox_g, "Grid spacing (mm)")->capture_default_str();
    auto* pad_opt = vox->add_option("--pad", vox_pad, "Empty voxels on every side");
    vox->add_option("--rho-max", vox_rho, "Pad for scales up to this radius (mm)")->excludes(pad_opt);
    vox->add_option("--voxel-cap", vox_cap, "Refuse grids above this many voxels")->capture_default_str();
    vox->callback([&] {
        action = [&] {
            if (!(vox_g > 0)) throw ConfigError("--g must be positive");
            const std::int64_t pad = vox_pad ? *vox_pad : ladder_padding(vox_rho.value_or(0), vox_g);
            if (pad < 0) throw ConfigError("--pad must be non-negative");
            const auto grid = voxelize(load_mesh(vox_in), vox_g, pad, {.voxel_cap = vox_cap});
            save_vgrid(vox_out, grid);
            emit_json({{"dims", dims_json(grid.dims())}, {"padding", pad}, {"occupied", grid.count()}}, "");
        };
    });

    // edt -------------------------------------------------------------------
    auto* edt_cmd = app.add_subcommand("edt", "Exact squared Euclidean distance transform of a VGRID1 grid");
    std::string edt_in, edt_out, edt_prov, edt_feature = "occupied";
    bool edt_exterior = false;
    edt_cmd->add_option("input", edt_in, "VGRID1 grid")->required();
    edt_cmd->add_option("-o,--out", edt_out, "DFLD1 output")->required();
    edt_cmd->add_option("--prov", edt_prov, "Also write the PROV1 nearest-feature map here");
    edt_cmd->add_option("--feature", edt_feature, "Which voxels are features")
        ->check(CLI::IsMember({"occupied", "empty"}))
        ->capture_default_str();
    edt_cmd->add_flag("--exterior-feature", edt_exterior, "Treat lattice points outside the grid as features");
    edt_cmd->callback([&] {
        action = [&] {
            const auto grid = load_vgrid(edt_in);
            const auto res = edt(grid, edt_feature == "occupied" ? Feature::occupied : Feature::empty,
                                 {.provenance = !edt_prov.empty(), .exterior_is_feature = edt_exterior});
            {
                std::ofstream out(edt_out, std::ios::binary);
                if (!out) throw ResourceError("cannot write " + edt_out);
                write_dfld(out, res.field);
            }
            if (res.provenance) {
                std::ofstream out(edt_prov, std::ios::binary);
                if (!out) throw ResourceError("cannot write " + edt_prov);
                write_prov(out, *res.provenance);
            }
        };
    });

    // scalespace ------------------------------------------------------------
    auto* ssc = app.add_subcommand("scalespace", "Closings (and openings) of a grid over a scale ladder");
    std::string ss_in, ss_dir = ".";
    std::vector<double> ss_scales{1, 2, 5, 10, 20, 30};
    std::optional<double> ss_g;
    bool ss_open = false;
    ssc->add_option("input", ss_in, "VGRID1 grid")->required();
    ssc->add_option("--scales", ss_scales, "Strictly increasing radii (mm)")->delimiter(',')->capture_default_str();
    ssc->add_option("--g", ss_g, "Expected grid spacing (mm); must match the grid");
    ssc->add_option("--out-dir", ss_dir, "Output directory")->capture_default_str();
    ssc->add_flag("--openings", ss_open, "Also compute volumetric openings");
    ssc->callback([&] {
        action = [&] {
            const ScaleLadder ladder(ss_scales);
            const auto grid = load_vgrid(ss_in);
            check_spacing(ss_g, grid);
            const auto ss = scale_space(grid, ladder, {.openings = ss_open, .provenance = false});
            ensure_dir(ss_dir);
            const auto stem = stem_of(ss_in);
            Json manifest;
            manifest["input"] = ss_in;
            manifest["scales"] = ss_scales;
            manifest["dims"] = dims_json(grid.dims());
            manifest["spacing"] = grid.spacing();
            Json levels = Json::array();
            for (const auto& lv : ss.levels) {
                Json l;
                l["rho"] = lv.rho;
                const auto cname = stem + "_close_" + scale_tag(lv.rho) + ".vgrid";
                save_vgrid(join(ss_dir, cname), lv.closed);
                l["closing"] = cname;
                l["closed_voxels"] = lv.closed.count();
                if (lv.opened) {
                    const auto oname = stem + "_open_" + scale_tag(lv.rho) + ".vgrid";
                    save_vgrid(join(ss_dir, oname), *lv.opened);
                    l["opening"] = oname;
                    l["opened_voxels"] = lv.opened->count();
                }
                levels.push_back(l);
            }
            manifest["levels"] = levels;
            Json viol = Json::array();
            for (const auto& v : ss.ordering_violations)
                viol.push_back({{"rho_lo", v.rho_lo}, {"rho_hi", v.rho_hi}, {"closed_excess", v.closed_excess},
                                {"opened_excess", v.opened_excess}});
            manifest["ordering_violations"] = viol;
            emit_json(manifest, join(ss_dir, stem + "_scalespace.json"));
        };
    });

    // surfaces --------------------------------------------------------------
    auto* srf = app.add_subcommand("surfaces", "Closing and opening heightfield meshes from a closed extruded solid");
    std::string srf_in, srf_dir = ".", srf_name, srf_source;
    double srf_rho = 0, srf_depth = 0;
    srf->add_option("input", srf_in, "Closed solid as VGRID1")->required();
    srf->add_option("--rho", srf_rho, "Scale the solid was closed at (mm), used in file names")->capture_default_str();
    srf->add_option("--depth", srf_depth, "Extrusion depth; lifts the opening back onto the facet")->capture_default_str();
    srf->add_option("--name", srf_name, "Facet name for output files (default: input stem)");
    srf->add_option("--source", srf_source, "Unclosed solid VGRID1; enables the reliability masks");
    srf->add_option("--out-dir", srf_dir, "Output directory")->capture_default_str();
    srf->callback([&] {
        action = [&] {
            if (srf_rho < 0 || srf_depth < 0) throw ConfigError("--rho and --depth must be non-negative");
            const auto closed = load_vgrid(srf_in);
            const auto pair = extract_surfaces(closed, srf_rho);
            const auto name = srf_name.empty() ? stem_of(srf_in) : srf_name;
            const auto tag = scale_tag(srf_rho);
            ensure_dir(srf_dir);
            save_mesh(join(srf_dir, name + "_close_" + tag + ".obj"), to_mesh(pair.closing, name + "_close_" + tag));
            save_mesh(join(srf_dir, name + "_open_" + tag + ".obj"), to_mesh(lifted(pair.opening, srf_depth), name + "_open_" + tag));
            Json report{{"rho", srf_rho}, {"columns", pair.closing.defined()}};
            if (srf_depth > 0) {
                const auto sep = separation(pair.closing, pair.opening, srf_depth);
                report["separation"] = {{"max", sep.max}, {"mean", sep.mean}};
            }
            if (!srf_source.empty()) {
                const auto source = load_vgrid(srf_source);
                const auto prov = edt(source, Feature::occupied, {.provenance = true, .exterior_is_feature = false}).provenance;
                for (auto kind : {SurfaceKind::closing, SurfaceKind::opening}) {
                    const auto mask = reliability_mask(source, *prov, closed, kind);
                    const auto pgm = name + (kind == SurfaceKind::closing ? "_close_" : "_open_") + tag + "_reliability.pgm";
                    save_pgm(join(srf_dir, pgm), mask);
                    report[to_string(kind)] = {{"pgm", pgm}, {"unreliable_columns", mask.unreliable}, {"border_width", mask.border_width}};
                }
            }
            emit_json(report, "");
        };
    });

    // check -----------------------------------------------------------------
    auto* chk = app.add_subcommand("check", "Complementarity of a fragment pair inside the doubly eroded mask");
    std::string chk_x, chk_y, chk_mask, chk_out;
    std::vector<double> chk_scales;
    chk->add_option("--x", chk_x, "Fragment X (VGRID1)")->required();
    chk->add_option("--y", chk_y, "Fragment Y (VGRID1)")->required();
    chk->add_option("--mask", chk_mask, "Mask M (VGRID1)")->required();
    chk->add_option("--scales", chk_scales, "Radii (mm); 0 checks the raw pair")->delimiter(',')->required();
    chk->add_option("-o,--out", chk_out, "JSON report path (stdout when omitted)");
    chk->callback([&] {
        action = [&] {
            const ScaleLadder ladder(chk_scales);
            const auto x = load_vgrid(chk_x), y = load_vgrid(chk_y), mask = load_vgrid(chk_mask);
            Json out = Json::array();
            for (double rho : ladder.scales()) {
                if (rho == 0) {
                    out.push_back(report_json(check_exact(x, y, mask)));
                    continue;
                }
                const auto r = check_at_scale(x, y, mask, rho);
                out.push_back(report_json(r.a));
                out.push_back(report_json(r.b));
            }
            emit_json(out, chk_out);
        };
    });

    // synth -----------------------------------------------------------------
    auto* syn = app.add_subcommand("synth", "Seeded synthetic facet plus a complementary fragment pair");
    SynthSpec spec;
    std::string syn_dir = ".", syn_name;
    double syn_g = 0.2;
    std::optional<double> syn_thickness;
    std::int64_t syn_pad = 11;
    bool syn_no_pair = false;
    syn->add_option("--seed", spec.seed)->capture_default_str();
    syn->add_option("--extent-x", spec.extent_x, "mm")->capture_default_str();
    syn->add_option("--extent-y", spec.extent_y, "mm")->capture_default_str();
    syn->add_option("--slope", spec.slope_cap, "Bound on the surface gradient")->capture_default_str();
    syn->add_option("--components", spec.components, "Number of cosine components")->capture_default_str();
    syn->add_option("--lambda-min", spec.wavelength_min, "Shortest wavelength (mm)")->capture_default_str();
    syn->add_option("--lambda-max", spec.wavelength_max, "Longest wavelength (mm)")->capture_default_str();
    syn->add_option("--step", spec.step, "Facet sampling step (mm)")->capture_default_str();
    syn->add_option("--g", syn_g, "Pair grid spacing (mm)")->capture_default_str();
    syn->add_option("--thickness", syn_thickness, "Slab thickness (mm); default fits the crack plus 4 voxels");
    syn->add_option("--pad", syn_pad, "Empty voxels around the slab")->capture_default_str();
    syn->add_option("--name", syn_name, "Base name of the outputs (default synth_<seed>)");
    syn->add_option("--out-dir", syn_dir, "Output directory")->capture_default_str();
    syn->add_flag("--no-pair", syn_no_pair, "Only write the facet OBJ");
    syn->callback([&] {
        action = [&] {
            const auto facet = gen_facet(spec);
            const auto name = syn_name.empty() ? facet.name : syn_name;
            ensure_dir(syn_dir);
            save_mesh(join(syn_dir, name + ".obj"), facet);
            Json report{{"facet", name + ".obj"}, {"vertices", facet.vertices.size()}, {"faces", facet.faces.size()}};
            if (!syn_no_pair) {
                const auto surf = make_surface(spec);
                const double thickness = syn_thickness.value_or(2 * surf.amplitude_bound() + 4 * syn_g);
                const auto pair = gen_pair(spec, thickness, syn_g, syn_pad);
                save_vgrid(join(syn_dir, name + "_x.vgrid"), pair.x);
                save_vgrid(join(syn_dir, name + "_y.vgrid"), pair.y);
                save_vgrid(join(syn_dir, name + "_mask.vgrid"), pair.mask);
                report["x"] = name + "_x.vgrid";
                report["y"] = name + "_y.vgrid";
                report["mask"] = name + "_mask.vgrid";
                report["thickness"] = thickness;
                report["dims"] = dims_json(pair.mask.dims());
            }
            report["slope_bound"] = make_surface(spec).slope_bound();
            emit_json(report, "");
        };
    });

    // pipeline --------------------------------------------------------------
    auto* pip = app.add_subcommand("pipeline", "Facet to multi-scale closing and opening surfaces, with a manifest");
    PipelineConfig pcfg;
    std::string pip_manifest;
    bool pip_dry = false, pip_no_rel = false;
    std::optional<double> pip_depth;
    pip->add_option("input", pcfg.input, "Facet OBJ");
    pip->add_option("--g", pcfg.g, "Grid spacing (mm)")->capture_default_str();
    pip->add_option("--scales", pcfg.scales, "Strictly increasing radii (mm)")->delimiter(',')->capture_default_str();
    pip->add_option("--out-dir", pcfg.output_dir, "Output directory")->capture_default_str();
    pip->add_option("--voxel-cap", pcfg.voxel_cap, "Refuse grids above this many voxels")->capture_default_str();
    pip->add_option("--depth", pip_depth, "Extrusion depth override (mm)");
    pip->add_flag("--no-reliability", pip_no_rel, "Skip provenance and the PGM reliability masks");
    pip->add_flag("--dry-run", pip_dry, "Report the grid plan without voxelizing");
    pip->add_option("--manifest", pip_manifest, "Rerun the configuration recorded in a manifest");
    pip->callback([&] {
        action = [&] {
            PipelineConfig cfg = pcfg;
            if (!pip_manifest.empty()) {
                std::ifstream in(pip_manifest);
                if (!in) throw ConfigError("cannot open manifest " + pip_manifest);
                Json j;
                try {
                    j = Json::parse(in);
                }
                catch (const nlohmann::json::exception& e) {
                    throw ConfigError("manifest " + pip_manifest + ": " + e.what());
                }
                const auto out_dir = pcfg.output_dir;
                cfg = config_from_json(j);
                if (pip->count("--out-dir")) cfg.output_dir = out_dir;
            }
            else {
                cfg.depth = pip_depth;
                cfg.reliability = !pip_no_rel;
                cfg.threads = threads;
            }
            if (pip_dry) {
                emit_json(plan_pipeline(cfg), "");
                return;
            }
            const auto manifest = run_pipeline(cfg);
            Json summary{{"manifest", join(cfg.output_dir, "manifest.json")},
                         {"outputs", manifest["outputs"].size() + 1},
                         {"grid", manifest["grid"]},
                         {"ordering_violations", manifest["ordering_violations"]},
                         {"timings_s", manifest["timings_s"]}};
            emit_json(summary, "");
        };
    });

    // bench -----------------------------------------------------------------
    auto* ben = app.add_subcommand("bench", "Stage timings on standard instances, as CSV");
    BenchConfig bcfg;
    std::string ben_out;
    bool ben_no_surf = false;
    ben->add_option("--sizes", bcfg.edt_sizes, "Cube edge lengths for the EDT rows")->delimiter(',')->capture_default_str();
    ben->add_flag("--large", bcfg.large, "Add a 500^3 transform when memory allows");
    ben->add_flag("--no-surfaces", ben_no_surf, "Skip the closing-surface row");
    ben->add_option("--voxel-cap", bcfg.voxel_cap, "Skip instances above this many voxels")->capture_default_str();
    ben->add_option("--seed", bcfg.seed)->capture_default_str();
    ben->add_option("-o,--out", ben_out, "CSV path (stdout when omitted)");
    ben->callback([&] {
        action = [&] {
            bcfg.surfaces = !ben_no_surf;
            bcfg.threads = threads;
            const auto rows = bench(bcfg);
            if (ben_out.empty() || ben_out == "-") {
                write_bench_csv(std::cout, rows);
                return;
            }
            std::ofstream out(ben_out);
            if (!out) throw ResourceError("cannot write " + ben_out);
            write_bench_csv(out, rows);
        };
    });

    try {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        parallel::set_threads(threads);
        if (action) action();
        return kOk;
    }
    catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e.kind());
    }
    catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConfig;
    }
    catch (const std::bad_alloc&) {
        std::cerr << "error: out of memory\n";
        return kResource;
    }
    catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kInternal;
    }
}
