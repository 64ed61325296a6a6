#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "cellpeel/grid.hpp"

namespace cellpeel {

/// Contents of the `<stem>.meta.json` sidecar written next to every stack.
struct SidecarMeta {
  std::optional<Spacing> spacing;
  std::optional<double> frame_interval_s;
  /// Only present for peel images.
  std::optional<std::vector<std::size_t>> row_lengths;
  std::optional<std::size_t> first_slice;
};

/// `dir/name.tif` -> `dir/name.meta.json`.
std::filesystem::path sidecar_path(const std::filesystem::path& stack);
std::optional<SidecarMeta> read_sidecar(const std::filesystem::path& stack);
void write_sidecar(const std::filesystem::path& stack, const SidecarMeta& meta);

/// Loads a multi-page 8- or 16-bit grayscale TIFF; pages become z slices.
/// Spacing comes from the sidecar if present, else from the TIFF resolution
/// tags (plus an ImageJ `spacing=` entry for z), else (1, 1, 1).
IntensityVolume load_stack(const std::filesystem::path& path);

/// Loads a grayscale label stack of 8, 16 or 32 bits per sample.
LabelVolume load_labels(const std::filesystem::path& path);

/// Loads a stack and binarizes it (nonzero -> 1).
MaskVolume load_mask(const std::filesystem::path& path);

/// Writes an uncompressed multi-page TIFF plus the spacing sidecar. Output is
/// byte-for-byte reproducible for identical input.
void save_stack(const IntensityVolume& vol, const std::filesystem::path& path);
/// Label stacks use the narrowest of 8/16/32 bits that holds the max label.
void save_stack(const LabelVolume& vol, const std::filesystem::path& path);
/// 8-bit, 0/255.
void save_mask(const MaskVolume& vol, const std::filesystem::path& path);

/// Single-page label image (16-bit unless a label exceeds 65535).
void save_label_image(const LabelImage& img, const std::filesystem::path& path);
LabelImage load_label_image(const std::filesystem::path& path);

/// Upsamples along z so that all three spacings equal the lateral spacing.
/// Output slice k sits at physical depth k * sx; values are linearly
/// interpolated between the two bracketing input slices and clamped to the
/// last input slice beyond the end.
IntensityVolume resample_isotropic(const IntensityVolume& vol);
/// Same geometry as the intensity overload; interpolated occupancy >= 0.5 is foreground.
MaskVolume resample_isotropic(const MaskVolume& vol);

namespace detail {

/// Decoded TIFF pages, all samples widened to 32 bits.
struct RawTiff {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t pages = 0;
  std::size_t samples = 1;
  int bits = 0;
  std::optional<Spacing> tag_spacing;
  std::vector<std::uint32_t> values;  // page-major, then sample plane, then rows
};

RawTiff read_tiff(const std::filesystem::path& path, bool allow_multisample);

/// Writes `pages` pages of `samples` planar channels each.
void write_tiff(const std::filesystem::path& path, std::size_t width, std::size_t height,
                std::size_t pages, std::size_t samples, int bits,
                const std::vector<std::uint32_t>& values, const Spacing& spacing);

}  // namespace detail

}  // namespace cellpeel
