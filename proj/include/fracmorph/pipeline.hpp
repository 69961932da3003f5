#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "edt.hpp"
#include "embed.hpp"
#include "lipschitz.hpp"
#include "morphology.hpp"
#include "surfaces.hpp"
#include "synth.hpp"

namespace fracmorph {

using Json = nlohmann::ordered_json;

struct PipelineConfig {
    std::string input;
    double g = 0.2;
    std::vector<double> scales{1, 2, 5, 10, 20, 30};
    std::string output_dir = "out";
    std::int64_t voxel_cap = kDefaultVoxelCap;
    unsigned threads = 1;
    std::optional<double> depth; ///< extrusion depth override; choose_depth when empty
    bool reliability = true;

    void validate() const
    {
        if (input.empty()) throw ConfigError("pipeline: no input facet");
        if (output_dir.empty()) throw ConfigError("pipeline: no output directory");
        if (!(g > 0) || !std::isfinite(g)) throw ConfigError("pipeline: g must be a positive number");
        (void)ScaleLadder(scales);
        if (voxel_cap <= 0) throw ConfigError("pipeline: voxel cap must be positive");
        if (threads == 0) throw ConfigError("pipeline: thread count must be at least 1");
        if (depth && !(*depth > 0)) throw ConfigError("pipeline: depth override must be positive");
    }
};

[[nodiscard]] inline Json to_json(const PipelineConfig& c)
{
    Json j;
    j["input"] = c.input;
    j["g"] = c.g;
    j["scales"] = c.scales;
    j["output_dir"] = c.output_dir;
    j["voxel_cap"] = c.voxel_cap;
    j["threads"] = c.threads;
    j["depth"] = c.depth ? Json(*c.depth) : Json(nullptr);
    j["reliability"] = c.reliability;
    return j;
}

/// Rebuilds the configuration recorded in a manifest (or a bare config
/// object). Doubles are stored with full round-trip precision by the JSON
/// writer, so a rerun sees bit-identical parameters.
[[nodiscard]] inline PipelineConfig config_from_json(const Json& in)
{
    const Json& j = in.contains("config") ? in.at("config") : in;
    try {
        PipelineConfig c;
        c.input = j.at("input").get<std::string>();
        c.g = j.value("g", c.g);
        if (j.contains("scales")) c.scales = j.at("scales").get<std::vector<double>>();
        c.output_dir = j.value("output_dir", c.output_dir);
        c.voxel_cap = j.value("voxel_cap", c.voxel_cap);
        c.threads = j.value("threads", c.threads);
        if (j.contains("depth") && !j.at("depth").is_null()) c.depth = j.at("depth").get<double>();
        c.reliability = j.value("reliability", c.reliability);
        return c;
    }
    catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("manifest: ") + e.what());
    }
}

/// "%g" rendering used in output file names: 1, 2.5, 0.4.
[[nodiscard]] inline std::string scale_tag(double rho)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", rho);
    return buf;
}

[[nodiscard]] inline Json dims_json(const Dims& d) { return Json::array({d.nx, d.ny, d.nz}); }
[[nodiscard]] inline Json vec_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

/// Grid layout a run would use, computed without voxelizing.
struct GridPlan {
    Dims tight;
    std::int64_t pad = 0;
    Dims padded;
    double depth = 0;
};

[[nodiscard]] inline GridPlan plan_grid(const TriangleMesh& aligned_facet, double g, double rho_max, std::optional<double> depth)
{
    const Aabb box = bounds(aligned_facet);
    GridPlan p;
    p.depth = depth ? *depth : choose_depth(box.hi.z() - box.lo.z(), rho_max, g);
    Aabb solid = box;
    solid.lo.z() -= p.depth;
    p.tight = tight_geometry(solid, g).dims;
    p.pad = ladder_padding(rho_max, g);
    p.padded = padded_dims(p.tight, p.pad);
    return p;
}

namespace detail {

/// Runs one stage, records its wall time, and prefixes any error with the
/// stage name while keeping its exit-code class.
template <class Fn>
auto timed_stage(Json& timings, const char* name, Fn&& fn)
{
    const auto t0 = std::chrono::steady_clock::now();
    auto finish = [&] {
        timings[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    try {
        if constexpr (std::is_void_v<decltype(fn())>) {
            fn();
            finish();
        }
        else {
            auto r = fn();
            finish();
            return r;
        }
    }
    catch (const Error& e) {
        throw Error(e.kind(), std::string(name) + ": " + e.what());
    }
    catch (const std::invalid_argument& e) {
        throw Error(ErrorKind::config, std::string(name) + ": " + e.what());
    }
    catch (const std::bad_alloc&) {
        throw Error(ErrorKind::resource, std::string(name) + ": out of memory");
    }
}

/// Files written by a run; removed again unless the run commits.
class OutputSet {
public:
    explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir))
    {
        std::error_code ec;
        created_dir_ = !std::filesystem::exists(dir_, ec);
        std::filesystem::create_directories(dir_, ec);
        if (ec) throw ResourceError("cannot create output directory " + dir_.string() + ": " + ec.message());
    }
    OutputSet(const OutputSet&) = delete;
    OutputSet& operator=(const OutputSet&) = delete;
    ~OutputSet()
    {
        if (committed_) return;
        std::error_code ec;
        for (const auto& f : files_)
            if (std::filesystem::is_regular_file(dir_ / f, ec)) std::filesystem::remove(dir_ / f, ec);
        if (created_dir_ && std::filesystem::is_empty(dir_, ec)) std::filesystem::remove(dir_, ec);
    }
    /// Registers a file before it is written so a failed write is cleaned too.
    std::string add(const std::string& name)
    {
        files_.push_back(name);
        return (dir_ / name).string();
    }
    [[nodiscard]] const std::vector<std::string>& files() const noexcept { return files_; }
    void commit() noexcept { committed_ = true; }

private:
    std::filesystem::path dir_;
    std::vector<std::string> files_;
    bool created_dir_ = false;
    bool committed_ = false;
};

} // namespace detail

[[nodiscard]] inline Json lipschitz_json(const LipschitzCone& c, bool visible = true)
{
    Json j;
    j["axis"] = vec_json(c.axis);
    j["half_angle_rad"] = c.half_angle;
    j["slope"] = c.slope;
    j["visible"] = visible;
    return j;
}

[[nodiscard]] inline Json plan_json(const GridPlan& p, double g)
{
    Json j;
    j["depth"] = p.depth;
    j["tight_dims"] = dims_json(p.tight);
    j["padding"] = p.pad;
    j["dims"] = dims_json(p.padded);
    j["voxels"] = p.padded.count();
    j["discretization_bound"] = discretization_bound(g);
    return j;
}

/// Full pipeline: load, Lipschitz fit, align, extrude, voxelize, closing
/// scale space, surface extraction. Writes per scale
/// `<facet>_close_<rho>.obj` and `<facet>_open_<rho>.obj` (both back in the
/// input frame; the opening lifted by the extrusion depth so it sits on the
/// facet), the reliability masks as PGM, and `manifest.json`.
[[nodiscard]] inline Json run_pipeline(const PipelineConfig& cfg)
{
    cfg.validate();
    const ScaleLadder ladder(cfg.scales);
    parallel::set_threads(cfg.threads);

    Json manifest;
    manifest["format"] = "fracmorph-manifest-1";
    manifest["config"] = to_json(cfg);
    Json timings = Json::object();
    const auto t_total = std::chrono::steady_clock::now();

    auto mesh = detail::timed_stage(timings, "load", [&] { return load_mesh(cfg.input); });
    const std::string stem = mesh.name.empty() ? "facet" : mesh.name;
    const auto cone = detail::timed_stage(timings, "lipschitz", [&] { return fit_cone(face_normals(mesh)); });
    manifest["lipschitz"] = lipschitz_json(cone);
    const Eigen::Matrix3d rot = cone.axis.isApprox(Vec3::UnitZ(), 0.0) ? Eigen::Matrix3d::Identity() : rotation_to_z(cone.axis);
    const auto aligned = detail::timed_stage(timings, "align", [&] { return align_to_axis(mesh, cone); });
    manifest["rotation"] = Json::array({vec_json(rot.row(0).transpose()), vec_json(rot.row(1).transpose()), vec_json(rot.row(2).transpose())});

    EmbeddedFacet emb = detail::timed_stage(timings, "extrude_voxelize", [&] {
        return embed_facet(aligned, cfg.g, ladder.max(), {.depth = cfg.depth, .voxel_cap = cfg.voxel_cap});
    });
    const auto& geom = emb.grid.geometry();
    Json grid;
    grid["depth"] = emb.depth;
    grid["tight_dims"] = dims_json(emb.tight.dims);
    grid["padding"] = emb.pad;
    grid["dims"] = dims_json(geom.dims);
    grid["origin"] = vec_json(geom.origin);
    grid["spacing"] = geom.spacing;
    grid["voxels"] = geom.count();
    grid["occupied"] = emb.grid.count();
    grid["discretization_bound"] = discretization_bound(cfg.g);
    manifest["grid"] = grid;

    const auto ss = detail::timed_stage(timings, "scale_space", [&] {
        return scale_space(emb.grid, ladder, {.openings = false, .provenance = cfg.reliability});
    });

    detail::OutputSet out(cfg.output_dir);
    const Eigen::Matrix3d back = rot.transpose();
    Json scales = Json::array();
    detail::timed_stage(timings, "surfaces", [&] {
        for (const auto& level : ss.levels) {
            const auto tag = scale_tag(level.rho);
            const auto pair = extract_surfaces(level.closed, level.rho);
            const auto sep = separation(pair.closing, pair.opening, emb.depth);
            Json s;
            s["rho"] = level.rho;
            s["closed_voxels"] = level.closed.count();
            const auto close_name = stem + "_close_" + tag + ".obj";
            const auto open_name = stem + "_open_" + tag + ".obj";
            save_mesh(out.add(close_name), transformed(to_mesh(pair.closing, stem + "_close_" + tag), back));
            save_mesh(out.add(open_name), transformed(to_mesh(lifted(pair.opening, emb.depth), stem + "_open_" + tag), back));
            s["closing_obj"] = close_name;
            s["opening_obj"] = open_name;
            s["columns"] = pair.closing.defined();
            s["separation"] = {{"max", sep.max}, {"mean", sep.mean}};
            const auto top = surface_complexity(level.closed, SurfaceKind::closing);
            const auto bottom = surface_complexity(level.closed, SurfaceKind::opening);
            s["closing_surface"] = {{"surface_voxels", top.surface_voxels}, {"exposed_faces", top.exposed_faces}};
            s["opening_surface"] = {{"surface_voxels", bottom.surface_voxels}, {"exposed_faces", bottom.exposed_faces}};
            if (cfg.reliability && ss.source_provenance) {
                Json rel;
                for (auto kind : {SurfaceKind::closing, SurfaceKind::opening}) {
                    const auto mask = reliability_mask(ss.source, *ss.source_provenance, level.closed, kind);
                    const auto name = stem + (kind == SurfaceKind::closing ? "_close_" : "_open_") + tag + "_reliability.pgm";
                    save_pgm(out.add(name), mask);
                    rel[to_string(kind)] = {{"pgm", name}, {"unreliable_columns", mask.unreliable}, {"border_width", mask.border_width}};
                }
                s["reliability"] = rel;
            }
            scales.push_back(std::move(s));
        }
    });
    manifest["scales"] = scales;
    Json viol = Json::array();
    for (const auto& v : ss.ordering_violations)
        viol.push_back({{"rho_lo", v.rho_lo}, {"rho_hi", v.rho_hi}, {"closed_excess", v.closed_excess}});
    manifest["ordering_violations"] = viol;
    timings["total"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_total).count();
    manifest["timings_s"] = timings;
    manifest["outputs"] = out.files();

    const auto manifest_path = out.add("manifest.json");
    {
        std::ofstream f(manifest_path);
        if (!f) throw ResourceError("cannot write " + manifest_path);
        f << manifest.dump(2) << '\n';
        if (!f) throw ResourceError("failed writing " + manifest_path);
    }
    out.commit();
    return manifest;
}

/// The layout half of run_pipeline: parameters, padding and grid size
/// without voxelizing or writing anything.
[[nodiscard]] inline Json plan_pipeline(const PipelineConfig& cfg)
{
    cfg.validate();
    const ScaleLadder ladder(cfg.scales);
    Json timings = Json::object();
    const auto mesh = detail::timed_stage(timings, "load", [&] { return load_mesh(cfg.input); });
    const auto cone = detail::timed_stage(timings, "lipschitz", [&] { return fit_cone(face_normals(mesh)); });
    const auto aligned = align_to_axis(mesh, cone);
    Json j;
    j["format"] = "fracmorph-plan-1";
    j["config"] = to_json(cfg);
    j["lipschitz"] = lipschitz_json(cone);
    j["grid"] = plan_json(plan_grid(aligned, cfg.g, ladder.max(), cfg.depth), cfg.g);
    return j;
}

// ---------------------------------------------------------------------------
// Benchmarks

struct BenchConfig {
    std::vector<std::int64_t> edt_sizes{64, 128, 256};
    bool large = false; ///< also time a 500^3 transform
    bool surfaces = true;
    std::int64_t voxel_cap = kDefaultVoxelCap;
    unsigned threads = 1;
    std::uint64_t seed = 1;

    void validate() const
    {
        for (auto n : edt_sizes)
            if (n <= 0) throw ConfigError("bench: grid sizes must be positive");
        if (voxel_cap <= 0) throw ConfigError("bench: voxel cap must be positive");
        if (threads == 0) throw ConfigError("bench: thread count must be at least 1");
    }
};

struct BenchRow {
    std::string stage;
    std::string instance;
    std::int64_t voxels = 0;
    double seconds = 0;
    std::optional<double> budget;
    bool skipped = false;
    std::string note;

    [[nodiscard]] std::optional<bool> within_budget() const
    {
        if (skipped || !budget) return std::nullopt;
        return seconds < *budget;
    }
};

/// MemAvailable from /proc/meminfo, or nullopt where that is unavailable.
[[nodiscard]] inline std::optional<std::int64_t> available_memory_bytes()
{
    std::ifstream in("/proc/meminfo");
    std::string key;
    std::int64_t kb = 0;
    std::string unit;
    while (in >> key >> kb >> unit)
        if (key == "MemAvailable:") return kb * 1024;
    return std::nullopt;
}

/// Seeded grid with roughly 1% occupied voxels. Sparse features make the
/// lower envelopes long, the slow case for the transform.
[[nodiscard]] inline VoxelGrid bench_grid(std::int64_t n, std::uint64_t seed)
{
    GridGeometry geom;
    geom.dims = {n, n, n};
    VoxelGrid grid(geom);
    SplitMix64 rng(seed);
    for (std::int64_t f = 0; f < grid.size(); ++f)
        if (rng.next() % 100 == 0) grid.set(f);
    return grid;
}

namespace detail {

template <class Fn>
double seconds_of(Fn&& fn)
{
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace detail

[[nodiscard]] inline std::vector<BenchRow> bench(const BenchConfig& cfg)
{
    cfg.validate();
    parallel::set_threads(cfg.threads);
    std::vector<BenchRow> rows;

    {
        // 71 x 71 cells at 0.25 mm: 10082 faces
        SynthSpec spec;
        spec.seed = cfg.seed;
        spec.extent_x = spec.extent_y = 17.75;
        const auto facet = gen_facet(spec);
        BenchRow r;
        r.stage = "lipschitz_extrude_embed";
        r.instance = std::to_string(facet.faces.size()) + " faces, g 0.2, rho_max 1";
        r.budget = 2.0;
        try {
            r.seconds = detail::seconds_of([&] {
                const auto cone = fit_cone(face_normals(facet));
                const auto e = embed_facet(align_to_axis(facet, cone), 0.2, 1.0, {.depth = std::nullopt, .voxel_cap = cfg.voxel_cap});
                r.voxels = e.grid.size();
            });
        }
        catch (const ResourceError& e) {
            r.skipped = true;
            r.note = e.what();
        }
        rows.push_back(r);
    }

    auto sizes = cfg.edt_sizes;
    if (cfg.large) sizes.push_back(500);
    const auto mem = available_memory_bytes();
    for (auto n : sizes) {
        BenchRow r;
        r.stage = "edt";
        r.instance = std::to_string(n) + "^3";
        r.voxels = n * n * n;
        if (n == 256) r.budget = 10.0;
        if (n == 500) r.budget = 60.0;
        // bit grid plus the 32-bit field, with headroom
        const std::int64_t need = r.voxels * 6;
        if (r.voxels > cfg.voxel_cap) {
            r.skipped = true;
            r.note = "exceeds voxel cap " + std::to_string(cfg.voxel_cap);
        }
        else if (mem && need > *mem) {
            r.skipped = true;
            r.note = "needs about " + std::to_string(need >> 20) + " MiB, " + std::to_string(*mem >> 20) + " MiB available";
        }
        else {
            try {
                const auto grid = bench_grid(n, cfg.seed);
                r.seconds = detail::seconds_of([&] { (void)edt(grid, Feature::occupied); });
            }
            catch (const std::bad_alloc&) {
                r.skipped = true;
                r.note = "allocation failed";
            }
        }
        rows.push_back(r);
    }

    if (cfg.surfaces) {
        SynthSpec spec;
        spec.seed = cfg.seed;
        const auto facet = gen_facet(spec);
        const ScaleLadder ladder(std::vector<double>{1, 2, 5});
        const auto e = embed_facet(facet, 0.2, ladder.max(), {.depth = std::nullopt, .voxel_cap = cfg.voxel_cap});
        BenchRow r;
        r.stage = "closing_surfaces";
        r.instance = "20x20 mm synth facet, g 0.2, scales 1,2,5";
        r.voxels = e.grid.size();
        r.budget = 50.0;
        r.seconds = detail::seconds_of([&] {
            const auto ss = scale_space(e.grid, ladder);
            for (const auto& lv : ss.levels) (void)extract_surfaces(lv.closed, lv.rho);
        });
        rows.push_back(r);
    }
    return rows;
}

inline void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows)
{
    out << "stage,instance,voxels,seconds,budget_s,within_budget,status,note\n";
    char buf[64];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.6f", r.seconds);
        out << r.stage << ",\"" << r.instance << "\"," << r.voxels << ',' << (r.skipped ? "" : buf) << ',';
        if (r.budget) out << *r.budget;
        out << ',';
        if (const auto ok = r.within_budget()) out << (*ok ? "yes" : "no");
        out << ',' << (r.skipped ? "skipped" : "ok") << ",\"" << r.note << "\"\n";
    }
}

} // namespace fracmorph
