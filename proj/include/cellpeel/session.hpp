#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cellpeel/masking.hpp"
#include "cellpeel/peel.hpp"
#include "cellpeel/pipeline.hpp"
#include "cellpeel/segment2d.hpp"

namespace cellpeel {

/// A mutation carried a revision other than the current one.
class ConflictError : public Error {
 public:
  ConflictError(std::uint64_t current, const std::string& what)
      : Error("pipeline-cli", what), current_(current) {}
  std::uint64_t current() const { return current_; }

 private:
  std::uint64_t current_;
};

/// A requested artefact (peel, mask, ...) has not been built yet.
class NotFoundError : public Error {
 public:
  explicit NotFoundError(const std::string& what) : Error("pipeline-cli", what) {}
};

/// Interactive working state for one dataset. Everything that a client can
/// change lives in the work directory:
///
///   session.json        id, stack frames, revision
///   annotations.json    polygons
///   seeds_tNNN.json     seed set per peel frame
///   furrow.json         furrow clicks
///   mask.tif, masked_tNNN.tif, peel_tNNN.tif, rectified_tNNN.tif
///
/// Data files are written before session.json, so a restart resumes at the
/// last committed revision. Mutations take an exclusive lock, reads a shared
/// one.
class Session {
 public:
  /// Opens `workdir`, resuming a previous session there if one exists. A new
  /// session needs the raw stack files (one per frame).
  Session(const std::filesystem::path& workdir, const std::vector<std::filesystem::path>& frames = {});

  const std::string& id() const { return id_; }
  const std::filesystem::path& workdir() const { return workdir_; }
  std::uint64_t revision() const;
  std::size_t frame_count() const { return frames_.size(); }
  nlohmann::json info() const;

  /// Raw stack of a frame (cached).
  std::shared_ptr<const IntensityVolume> raw(std::size_t frame) const;

  std::optional<AnnotationSet> annotations() const;
  std::optional<SeedSet> seeds(std::size_t frame) const;
  std::optional<FurrowLine> furrow() const;
  std::optional<PeelImage> peel(std::size_t frame, bool rectified = false) const;

  // Mutations. `expected` must equal the current revision when given; every
  // successful call returns the new revision.
  std::uint64_t put_annotations(const AnnotationSet& set, std::optional<std::uint64_t> expected);
  std::uint64_t put_seeds(std::size_t frame, const SeedSet& seeds, std::optional<std::uint64_t> expected);
  std::uint64_t put_furrow(const FurrowLine& furrow, std::optional<std::uint64_t> expected);
  std::uint64_t build_mask(std::optional<std::uint64_t> expected);
  std::uint64_t build_peels(Surface surface, const ShellParams& params, std::optional<std::uint64_t> expected);
  std::uint64_t rectify_peels(std::optional<std::uint64_t> expected);

  /// Segmentation of a peel frame with the stored seeds, or with fresh
  /// h-minima seeds when none are stored.
  Segmentation preview(std::size_t frame, const SegParams& params) const;

  std::filesystem::path frame_file(const char* stem, std::size_t frame) const;

 private:
  void check_revision(std::optional<std::uint64_t> expected) const;
  std::uint64_t commit();
  void check_frame(std::size_t frame) const;

  std::filesystem::path workdir_;
  std::string id_;
  std::vector<std::filesystem::path> frames_;
  std::uint64_t revision_ = 0;
  mutable std::shared_mutex mutex_;
  mutable std::mutex cache_mutex_;
  mutable std::map<std::size_t, std::shared_ptr<const IntensityVolume>> raw_cache_;
};

/// Validates each slice and the index order without requiring the two
/// slices a mask build needs, so a partially drawn set can be stored.
void validate_partial_annotations(const AnnotationSet& set);

}  // namespace cellpeel
