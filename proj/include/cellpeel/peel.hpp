#pragma once

#include <array>
#include <vector>

#include "cellpeel/grid.hpp"

namespace cellpeel {

/// Pixel position (x, z) inside one xz cross-section.
using RingPoint = std::array<int, 2>;

/// One revolution around a shell cross-section.
struct RingTrace {
  std::size_t slice_index = 0;
  std::vector<RingPoint> points;
  /// Length of the step arriving at each point: 1 for axis-aligned moves,
  /// sqrt(2) for diagonal ones. The first entry is the closing step from the
  /// last point back to the first, so the sum is the full perimeter.
  std::vector<double> step_len;

  double perimeter() const;
};

/// Follows a closed 8-connected ring of foreground pixels starting at
/// `start`. The next pixel is the unvisited neighbour closest in direction
/// to the previous move, trying counterclockwise before clockwise at each
/// angle. The result has non-positive shoelace area in (x right, z down)
/// coordinates; a trace that came out the other way is reversed, keeping
/// `start` first.
///
/// Throws ComputeError when the walk dead-ends before it can close or when
/// ring pixels are left unvisited (the message carries the orphan count).
RingTrace trace_slice_ring(const Mask2D& slice, RingPoint start, std::size_t slice_index = 0);

/// Signed shoelace area of a closed point sequence.
double signed_area(const std::vector<RingPoint>& points);

/// Reduces a ring-shaped band to a one-pixel closed curve by sequentially
/// deleting simple points (deletions that keep the foreground 8-connected and
/// the background 4-connected). With a priority image, pixels with the
/// largest priority go first; otherwise scan order.
Mask2D thin_ring(const Mask2D& band, const Image2D<double>* priority = nullptr);

/// `thin_ring` on every xz slice. With a distance map, pixels whose distance
/// is furthest from `t` are removed first so the curve follows the target
/// iso-distance.
MaskVolume thin_shell(const MaskVolume& shell, const DistanceVolume* edm = nullptr, double t = 0.0);

/// Unwrapped surface: one row per y slice, one column per traced ring pixel.
struct PeelImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t first_slice = 0;  // y index of row 0
  Spacing spacing;              // x: along the ring, y: between rows
  std::vector<double> intensity;
  std::vector<double> metric;  // step length per pixel, 0 where padded
  std::vector<std::uint8_t> valid;
  std::vector<std::size_t> row_length;
  /// Shell voxel (x, y, z) each pixel was sampled from; {-1, -1, -1} where
  /// padded. Empty for peels read back from disk.
  std::vector<std::array<int, 3>> source;

  PeelImage() = default;
  PeelImage(std::size_t w, std::size_t h);

  std::size_t index(std::size_t col, std::size_t row) const { return col + width * row; }
  /// Pixels inside their row's ring length.
  Mask2D used_region() const;
};

/// Traces every slice of a one-pixel-thick shell and samples `raw` along the
/// traces. The first slice starts at the shell pixel with minimum z (then
/// minimum x); each following slice starts at its shell pixel nearest to the
/// previous start (ties: smaller x, then smaller z).
PeelImage project_peel(const MaskVolume& shell, const IntensityVolume& raw);

/// Fills invalid pixels inside the used region with the harmonic average of
/// their in-region 4-neighbours (iterated to convergence), for both the
/// intensity and metric channels. `valid` is left untouched.
PeelImage fill_holes(const PeelImage& peel);

/// Physical length of the traced path over steps (i0, i1].
double measure_length(const RingTrace& trace, std::size_t i0, std::size_t i1, double lateral_spacing);

/// Clicked points (row, col) along a linear feature of the peel.
struct FurrowLine {
  std::vector<std::array<double, 2>> points;

  void validate() const;
  /// Furrow column at `row`: linear between clicks, constant outside them.
  double column_at(double row) const;
};

/// Cyclically shifts each row within its ring length so that the furrow
/// lands on column L/2. All channels move together.
PeelImage rectify(const PeelImage& peel, const FurrowLine& furrow);

}  // namespace cellpeel
