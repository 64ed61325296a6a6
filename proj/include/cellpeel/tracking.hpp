#pragma once

#include <array>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cellpeel/grid.hpp"

namespace cellpeel {

enum class TrackStatus { Active, Ended, Discarded };

struct TrackRow {
  std::uint32_t track_id = 0;
  std::size_t frame = 0;
  std::uint32_t label = 0;
  std::array<double, 3> centroid{};  // physical coordinates, um
  TrackStatus status = TrackStatus::Active;

  bool operator==(const TrackRow&) const = default;
};

/// Object-to-track assignments over time, sorted by (track_id, frame).
struct TrackTable {
  std::vector<TrackRow> rows;
  /// Tracks that took part in an overlap conflict; never "unambiguous".
  std::set<std::uint32_t> conflicted;

  /// (track_id, frame) unique, frames contiguous per track, one track per
  /// object per frame.
  void validate() const;
  std::vector<const TrackRow*> frame_rows(std::size_t frame) const;
  const TrackRow* find(std::uint32_t track_id, std::size_t frame) const;
  std::set<std::uint32_t> track_ids() const;
};

struct TrackParams {
  double max_dist = 5.0;  // um
  Spacing spacing;        // x: peel columns, y: peel rows
  std::optional<double> frame_interval;

  void validate() const;
};

/// Label and physical centroid of each object in a frame.
struct ObjectCentroid {
  std::uint32_t label = 0;
  std::size_t count = 0;
  std::array<double, 3> centroid{};
};

/// 2D centroids as (col * sx, row * sy, 0).
std::vector<ObjectCentroid> object_centroids(const LabelImage& labels, const Spacing& spacing);
/// 3D centroids as (x * sx, y * sy, z * sz).
std::vector<ObjectCentroid> object_centroids(const LabelVolume& labels);

/// Nearest-neighbour tracking of 2D segmentations. Between consecutive frames
/// all (previous, current) pairs within `max_dist` are matched greedily in
/// order of increasing distance, each object at most once. Unmatched previous
/// tracks end; unmatched current objects start new tracks. First-frame track
/// IDs equal the first-frame labels.
TrackTable track_2d(const std::vector<LabelImage>& frames, const TrackParams& params);

/// Largest-overlap propagation of first-frame IDs through 3D label volumes.
/// Each object takes the track of the previous-frame object it overlaps most
/// (ties: smaller previous label). When several objects claim one track the
/// largest overlap keeps it (ties: smaller label) and the others start new
/// tracks; all of them are recorded as conflicted. Objects with no overlap
/// start new tracks.
TrackTable track_3d_overlap(const std::vector<LabelVolume>& frames);

/// Labels with any voxel on a face of the volume.
std::set<std::uint32_t> boundary_labels(const LabelVolume& labels);
std::set<std::uint32_t> boundary_labels(const LabelImage& labels);

/// Keeps tracks present in every one of `n_frames` frames, never conflicted
/// and never on the boundary; all other rows are marked Discarded.
TrackTable filter_complete_tracks(const TrackTable& tracks, std::size_t n_frames,
                                  const std::vector<std::set<std::uint32_t>>& boundary_objects);

/// Relabels so that every connected component of every label value gets its
/// own label, numbered in scan order.
LabelVolume split_label_components(const LabelVolume& labels, int connectivity = 26);

const char* to_string(TrackStatus s);
TrackStatus track_status_from_string(const std::string& s);

}  // namespace cellpeel
