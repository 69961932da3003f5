#pragma once

#include <optional>

#include "extrusion.hpp"
#include "voxel_grid.hpp"

namespace fracmorph {

/// An aligned facet extruded and voxelized with room for every scale up to
/// rho_max.
struct EmbeddedFacet {
    ExtrudedSolid solid;
    VoxelGrid grid;
    GridGeometry tight;
    double depth = 0;
    std::int64_t pad = 0;
};

struct EmbedOptions {
    std::optional<double> depth; ///< defaults to choose_depth
    std::int64_t voxel_cap = kDefaultVoxelCap;
};

/// Padding for a ladder topping out at rho_max; a zero ladder still keeps
/// one empty layer so the solid never touches the grid shell.
[[nodiscard]] inline std::int64_t ladder_padding(double rho_max, double g)
{
    return rho_max > 0 ? required_padding(rho_max, g) : 1;
}

[[nodiscard]] inline EmbeddedFacet embed_facet(const TriangleMesh& aligned_facet, double g, double rho_max, const EmbedOptions& opt = {})
{
    if (!(g > 0)) throw ConfigError("grid spacing must be positive");
    const Aabb box = bounds(aligned_facet);
    EmbeddedFacet e;
    e.depth = opt.depth ? *opt.depth : choose_depth(box.hi.z() - box.lo.z(), rho_max, g);
    e.solid = extrude(aligned_facet, e.depth);
    e.pad = ladder_padding(rho_max, g);
    e.tight = tight_geometry(bounds(e.solid.mesh), g);
    e.grid = voxelize_in(e.solid.mesh, pad_geometry(e.tight, e.pad), {.voxel_cap = opt.voxel_cap});
    return e;
}

} // namespace fracmorph
