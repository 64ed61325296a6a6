#pragma once

#include <array>
#include <vector>

#include "cellpeel/grid.hpp"

namespace cellpeel {

/// Which faces of the grid are bordered by (virtual) background.
/// A face marked open behaves as if the foreground continued past it.
struct EdmBoundary {
  bool x_closed = true;
  bool y_closed = true;
  bool z_closed = true;
};

/// Exact squared Euclidean distance from every voxel to the nearest voxel
/// with `feature[i] == 0`, in voxel units (separable lower-envelope
/// transform). Voxels with no reachable feature get +infinity.
std::vector<double> squared_distance_to_zero(const std::vector<std::uint8_t>& feature, const Dims& dims,
                                             const EdmBoundary& boundary);

/// Distance from each foreground voxel to the closest background voxel;
/// background voxels get 0. By default everything outside the grid is
/// background. Throws InvalidArgument on an empty mask.
DistanceVolume euclidean_distance_map(const MaskVolume& mask, const EdmBoundary& boundary = {});

/// 2D variant on an image (width = x, height = z); outside-image handling per `border_is_background`.
Image2D<double> euclidean_distance_map_2d(const Mask2D& mask, bool border_is_background);

/// Labels 1..K in order of each component's first voxel in scan order.
/// Connectivity is 6, 18 or 26.
LabelVolume connected_components(const MaskVolume& mask, int connectivity);
/// 2D labelling with 4- or 8-connectivity.
LabelImage connected_components(const Mask2D& mask, int connectivity);

/// Number of labels produced by `connected_components` (max label).
std::uint32_t label_count(const LabelVolume& labels);

struct ShellParams {
  double t = 5.0;
  double tol = 0.5;
  int connectivity = 26;

  void validate() const;
};

struct ShellDiagnostics {
  std::size_t component_count = 0;
  std::vector<std::size_t> component_sizes;  // descending, ties by first voxel
};

struct ShellPair {
  MaskVolume apical;
  MaskVolume basal;
  DistanceVolume distance;  // the distance map the band was cut from
  ShellDiagnostics diagnostics;
};

/// Bands the distance map to [t - tol, t + tol], labels the band and keeps the
/// largest component as the apical shell and the second largest as the basal
/// shell. Equal sizes are ordered by smallest first-voxel index.
ShellPair extract_shells(const DistanceVolume& edm, const ShellParams& params = {});

/// Shell extraction for an annotated crop. The distance map is computed on
/// the mask's y-extent with both y faces open, so the cut ends of the crop do
/// not form caps joining the apical and basal bands; the band is then
/// extracted as in `extract_shells` and placed back into full-size masks.
ShellPair shells_from_mask(const MaskVolume& mask, const ShellParams& params = {});

/// Offsets of the neighbourhood for 6/18/26 (3D) connectivity.
std::vector<std::array<int, 3>> neighbour_offsets_3d(int connectivity);
/// Offsets (dcol, drow) for 4/8 connectivity.
std::vector<std::array<int, 2>> neighbour_offsets_2d(int connectivity);

}  // namespace cellpeel
