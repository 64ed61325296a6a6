#pragma once

#include <optional>
#include <string>

#include "cellpeel/grid.hpp"
#include "cellpeel/masking.hpp"
#include "cellpeel/peel.hpp"
#include "cellpeel/segment2d.hpp"
#include "cellpeel/shells.hpp"

namespace cellpeel {

enum class Surface { Apical, Basal };

Surface surface_from_string(const std::string& s);
const char* to_string(Surface s);

/// Mask and shell for one raw stack, resampled to isotropic cross-sections
/// first when the stack is anisotropic, then peeled.
PeelImage build_peel(const MaskVolume& mask, const IntensityVolume& raw, Surface surface, const ShellParams& params,
                     bool fill = true);

struct Segmentation {
  SeedSet seeds;
  LabelImage labels;
};

/// Watershed of a peel's used region. Without `seeds` the h-minima seeds are
/// computed first.
Segmentation segment_peel(const PeelImage& peel, const SegParams& params, const std::optional<SeedSet>& seeds = {});

}  // namespace cellpeel
