#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cellpeel/grid.hpp"

namespace cellpeel {

/// Encodes an 8-bit grayscale image as PNG bytes.
std::string encode_png_gray8(const std::vector<std::uint8_t>& pixels, std::size_t width, std::size_t height);

/// Maps [lo, hi] linearly onto 0..255, clamping outside values.
std::vector<std::uint8_t> window_to_8bit(const std::vector<double>& values, double lo, double hi);

/// Decodes an 8-bit grayscale PNG (used by tests and tools).
Image2D<std::uint8_t> decode_png_gray8(const std::string& bytes);

}  // namespace cellpeel
