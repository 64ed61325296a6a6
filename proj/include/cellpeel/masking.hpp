#pragma once

#include <optional>
#include <vector>

#include "cellpeel/grid.hpp"

namespace cellpeel {

/// Vertex of an annotation polygon in cross-section coordinates: x is
/// left-right, z is dorsoventral, both in voxel units with pixel centres at
/// integer positions.
struct Point2 {
  double x = 0;
  double z = 0;
  bool operator==(const Point2&) const = default;
};

using Polygon = std::vector<Point2>;

/// Outer (and optional inner) boundary drawn on one xz cross-section.
struct SliceAnnotation {
  std::size_t slice_index = 0;  // along y
  Polygon outer;
  std::optional<Polygon> inner;

  /// Vertex counts, simplicity and containment of inner in outer.
  void validate() const;
};

/// Annotations along the anteroposterior (y) axis.
struct AnnotationSet {
  Dims dims;
  std::vector<SliceAnnotation> slices;

  void validate() const;
};

/// Even-odd point-in-polygon test; points on an edge count as inside.
bool point_in_polygon(const Polygon& poly, double x, double z);
bool point_on_boundary(const Polygon& poly, double x, double z);
/// True when no two edges intersect except adjacent edges at their shared vertex.
bool polygon_is_simple(const Polygon& poly);

/// Rasterizes the cross-section into an image of width nx and height nz.
/// A pixel is foreground when its centre is inside `outer` and not inside
/// `inner`.
Mask2D rasterize_annotation(const SliceAnnotation& ann, std::size_t nx, std::size_t nz);

/// Signed distance used for shape interpolation: foreground pixels get their
/// distance to the nearest background pixel minus one (so the rim is 0),
/// background pixels the negated distance to the nearest foreground pixel.
Image2D<double> signed_distance(const Mask2D& mask);

/// Builds the 3D mask. Annotated slices are copied from their rasterization;
/// a slice between annotated slices a < b is the zero super-level set of the
/// blend (1 - a') * D_a + a' * D_b of their signed distances with
/// a' = (y - a) / (b - a). Slices outside the annotated range stay empty.
MaskVolume interpolate_masks(const AnnotationSet& annotations, const Spacing& spacing = {});

/// Zeroes voxels outside the mask and writes the maximum representable
/// intensity on mask surface voxels (foreground voxels with a background
/// 6-neighbour or on the volume border). Interior voxels are copied.
IntensityVolume apply_mask_with_margin(const IntensityVolume& raw, const MaskVolume& mask);

/// Surface voxels as used by `apply_mask_with_margin`.
MaskVolume mask_surface(const MaskVolume& mask);

}  // namespace cellpeel
