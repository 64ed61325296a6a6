#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "cellpeel/grid.hpp"
#include "cellpeel/peel.hpp"
#include "cellpeel/tracking.hpp"

namespace cellpeel {

struct FeatureRow {
  std::uint32_t track_id = 0;
  std::size_t frame = 0;
  std::string feature;
  double value = 0.0;
  std::string unit;

  bool operator==(const FeatureRow&) const = default;
};

struct FeatureTable {
  std::vector<FeatureRow> rows;

  /// (track_id, frame, feature) unique and every unit non-empty.
  void validate() const;
  /// Orders rows by (track_id, frame, feature).
  void sort();
  void append(const FeatureTable& other);
  const FeatureRow* find(std::uint32_t track_id, std::size_t frame, const std::string& feature) const;
};

struct QuantifyParams {
  int shell_radius = 2;               // px
  std::optional<double> plane_cell;   // um; defaults to the lateral spacing

  void validate() const;
};

/// Principal axes of a point cloud, sorted by descending variance. Each axis
/// has its first nonzero component positive.
struct PrincipalAxes {
  std::array<double, 3> mean{};
  std::array<double, 3> variances{};
  std::array<std::array<double, 3>, 3> axes{};
};

PrincipalAxes principal_axes(const std::vector<std::array<double, 3>>& points);

/// Area, eccentricity and speed of every tracked object in one peel frame.
/// Area sums the metric channel times the peel spacing; speed needs the
/// previous frame in `tracks` and a frame interval.
FeatureTable features_2d(const LabelImage& labels, const PeelImage& peel, const TrackTable& tracks, std::size_t frame,
                         std::optional<double> frame_interval);

/// Voxel count times voxel volume for every tracked object present in
/// `frame`. Objects without voxels get no row.
FeatureTable cell_volume(const LabelVolume& labels, const TrackTable& tracks, std::size_t frame);

/// Outer shell of the labelled foreground: voxels of B that do not survive
/// erosion by the ball of radius `shell_radius`, keeping their labels.
/// Voxels outside the volume count as background.
LabelVolume extract_apical_patches(const LabelVolume& labels, const QuantifyParams& params);

/// Area of a surface patch projected onto its plane of largest variance,
/// measured as occupied grid cells of size `plane_cell`.
double apical_area(const std::vector<std::array<double, 3>>& patch, double plane_cell);

/// Extent of the cell along its patch normal, counting the thickness of one
/// voxel so that a single slab measures one voxel.
double apical_basal_length(const std::vector<std::array<double, 3>>& cell,
                           const std::vector<std::array<double, 3>>& patch, const Spacing& spacing);

/// Per-frame 3D features for every tracked object. `features` picks from
/// "volume", "apical_area" and "ab_length". Objects whose patch is
/// degenerate get no area or length row.
FeatureTable quantify_3d(const LabelVolume& labels, const TrackTable& tracks, std::size_t frame,
                         const QuantifyParams& params, const std::vector<std::string>& features);

}  // namespace cellpeel
