#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "cellpeel/error.hpp"

namespace cellpeel {

// Axis convention: x = left-right, y = anteroposterior, z = dorsoventral.
// Storage is x-fastest: index = x + nx * (y + ny * z). TIFF pages map to z.

struct Dims {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::size_t nz = 0;

  std::size_t count() const { return nx * ny * nz; }
  bool operator==(const Dims&) const = default;
};

/// Physical voxel size in micrometres.
struct Spacing {
  double x = 1.0;
  double y = 1.0;
  double z = 1.0;

  bool operator==(const Spacing&) const = default;
};

struct VolumeMeta {
  Dims dims;
  Spacing spacing;
  std::optional<double> frame_interval;  // seconds

  /// Throws InvalidArgument when dims, spacing or frame interval are out of range.
  void validate() const;
};

template <typename T>
struct Grid3 {
  VolumeMeta meta;
  std::vector<T> data;

  Grid3() = default;
  explicit Grid3(const VolumeMeta& m, T fill = T{}) : meta(m), data(m.dims.count(), fill) {}

  const Dims& dims() const { return meta.dims; }
  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
    return x + meta.dims.nx * (y + meta.dims.ny * z);
  }
  std::array<std::size_t, 3> coords(std::size_t i) const {
    const auto& d = meta.dims;
    return {i % d.nx, (i / d.nx) % d.ny, i / (d.nx * d.ny)};
  }
  T& at(std::size_t x, std::size_t y, std::size_t z) { return data[index(x, y, z)]; }
  const T& at(std::size_t x, std::size_t y, std::size_t z) const { return data[index(x, y, z)]; }
  bool in_bounds(long x, long y, long z) const {
    return x >= 0 && y >= 0 && z >= 0 && static_cast<std::size_t>(x) < meta.dims.nx &&
           static_cast<std::size_t>(y) < meta.dims.ny && static_cast<std::size_t>(z) < meta.dims.nz;
  }
};

/// Raw microscopy intensities. 8-bit data is held widened; `bits` records the
/// on-disk depth and therefore the maximum representable value.
struct IntensityVolume : Grid3<std::uint16_t> {
  int bits = 16;

  IntensityVolume() = default;
  IntensityVolume(const VolumeMeta& m, int bit_depth, std::uint16_t fill = 0)
      : Grid3<std::uint16_t>(m, fill), bits(bit_depth) {}

  std::uint16_t max_value() const { return bits == 8 ? 255 : 65535; }
};

/// Binary foreground grid, values 0 or 1.
using MaskVolume = Grid3<std::uint8_t>;
/// 0 is background; other values need not be contiguous.
using LabelVolume = Grid3<std::uint32_t>;
using DistanceVolume = Grid3<double>;

/// Row-major 2D grid: index = col + width * row.
template <typename T>
struct Image2D {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<T> data;

  Image2D() = default;
  Image2D(std::size_t w, std::size_t h, T fill = T{}) : width(w), height(h), data(w * h, fill) {}

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
  T& at(std::size_t col, std::size_t row) { return data[col + width * row]; }
  const T& at(std::size_t col, std::size_t row) const { return data[col + width * row]; }
  bool in_bounds(long col, long row) const {
    return col >= 0 && row >= 0 && static_cast<std::size_t>(col) < width &&
           static_cast<std::size_t>(row) < height;
  }
};

using Mask2D = Image2D<std::uint8_t>;
using LabelImage = Image2D<std::uint32_t>;

/// Copies one xz cross-section (fixed y) of a volume into a 2D image with
/// width nx and height nz.
template <typename T>
Image2D<T> xz_slice(const Grid3<T>& vol, std::size_t y) {
  const auto& d = vol.dims();
  Image2D<T> out(d.nx, d.nz);
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t x = 0; x < d.nx; ++x) out.at(x, z) = vol.at(x, y, z);
  return out;
}

template <typename T>
void set_xz_slice(Grid3<T>& vol, std::size_t y, const Image2D<T>& slice) {
  const auto& d = vol.dims();
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t x = 0; x < d.nx; ++x) vol.at(x, y, z) = slice.at(x, z);
}

}  // namespace cellpeel
