#pragma once

#include <array>
#include <vector>

#include "cellpeel/grid.hpp"

namespace cellpeel {

enum class SeedSource { Automatic, Manual };

struct Seed {
  std::size_t row = 0;
  std::size_t col = 0;
  std::uint32_t label = 0;
  SeedSource source = SeedSource::Automatic;

  bool operator==(const Seed&) const = default;
};

struct SeedSet {
  std::vector<Seed> seeds;
  /// Smallest label never issued; keeps removed labels from being reused
  /// across edits. 0 means "derive from the seeds".
  std::uint32_t next_label = 0;

  /// Labels unique and >= 1, positions distinct and inside width x height.
  void validate(std::size_t width, std::size_t height) const;
  std::uint32_t max_label() const;
};

struct SegParams {
  double h = 4.0;
  int connectivity = 4;
  /// Process the negated image, for data where cells are bright.
  bool invert = false;

  void validate() const;
};

/// Greyscale reconstruction by erosion of `marker` over `mask` (marker >= mask),
/// restricted to `domain` when it is non-empty.
Image2D<double> reconstruct_by_erosion(const Image2D<double>& marker, const Image2D<double>& mask,
                                       int connectivity, const Mask2D& domain = {});

/// One seed per regional minimum of the h-minima transform (reconstruction by
/// erosion of img + h over img). Each seed sits on its plateau's first pixel
/// in scan order; labels 1..K in that order. Pixels outside a non-empty
/// `domain` are ignored.
SeedSet h_minima_seeds(const Image2D<double>& img, const SegParams& params, const Mask2D& domain = {});

/// Applies removals first, then additions with fresh labels max + 1, max + 2, ...
/// Throws on unknown labels, out-of-range or occupied positions.
SeedSet edit_seeds(const SeedSet& seeds, const std::vector<std::array<std::size_t, 2>>& add_row_col,
                   const std::vector<std::uint32_t>& remove_labels, std::size_t width, std::size_t height);

/// Priority-flood watershed from the seeds. Pixels leave the queue ordered by
/// (intensity, insertion order) and take the label of the neighbour that
/// queued them, so regions tile the domain without watershed lines. Pixels
/// outside a non-empty `domain` get label 0.
LabelImage seeded_watershed(const Image2D<double>& img, const SeedSet& seeds, const SegParams& params,
                            const Mask2D& domain = {});

/// Pixels whose 4-neighbour carries a different label; used for preview
/// overlays.
std::vector<std::array<std::size_t, 2>> label_boundaries(const LabelImage& labels);

}  // namespace cellpeel
