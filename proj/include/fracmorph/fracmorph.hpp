#pragma once

#include "common.hpp"
#include "complementarity.hpp"
#include "edt.hpp"
#include "embed.hpp"
#include "extrusion.hpp"
#include "lipschitz.hpp"
#include "mesh.hpp"
#include "morphology.hpp"
#include "pipeline.hpp"
#include "surfaces.hpp"
#include "synth.hpp"
#include "voxel_grid.hpp"
