#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <vector>

#include "cellpeel/grid.hpp"
#include "cellpeel/masking.hpp"

namespace cellpeel {

/// Synthetic epithelium: a hollow cylinder along y, optionally with a V-shaped
/// groove pressed into its dorsal side, tiled into cells by angular sectors
/// and y segments. Radii are in voxels.
struct CylinderPhantom {
  double r_out = 30.0;
  double r_in = 15.0;
  std::size_t height = 64;
  double groove_depth = 0.0;
  double groove_half_width = 0.35;  // radians
  std::size_t margin = 4;           // empty voxels around the tissue in x and z
  std::optional<Dims> dims;         // overrides the automatic size
  Spacing spacing;
  std::size_t sectors = 24;
  std::size_t cell_length = 8;  // y extent of one cell
  double shift = 0.0;           // y translation per frame, voxels
  std::optional<double> frame_interval;
  std::uint64_t seed = 1;
  std::uint16_t noise = 3;  // uniform noise amplitude added to every voxel

  void validate() const;
  Dims grid() const;
  /// Radial indentation at angle `theta` (atan2 of z and x offsets).
  double groove(double theta) const;
  bool in_tissue(double x, double z) const;
};

MaskVolume cylinder_mask(const CylinderPhantom& p);
/// Membranes bright, cytoplasm dim, background dark, plus seeded noise.
IntensityVolume cylinder_raw(const CylinderPhantom& p, std::size_t frame = 0);
/// Ground-truth cells; a cell keeps its label in every frame.
LabelVolume cylinder_labels(const CylinderPhantom& p, std::size_t frame = 0);
/// Outer and inner polygons slightly outside the tissue on every `every`-th
/// slice (always including the first and last).
AnnotationSet cylinder_annotations(const CylinderPhantom& p, std::size_t every = 8, std::size_t vertices = 72);

/// Boxes of side `box` on a regular grid, all translated by `shift` voxels
/// along x per frame and clipped to the volume. Label k is the k-th box.
std::vector<LabelVolume> translated_boxes(const Dims& dims, std::size_t n_frames, int shift, std::size_t box,
                                          std::size_t pitch, std::size_t offset);

/// {p : |p - c| <= r} with c at the grid centre.
MaskVolume digital_sphere(double r, const Spacing& spacing = {});

}  // namespace cellpeel
