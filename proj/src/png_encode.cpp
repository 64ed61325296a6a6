#include "cellpeel/png_encode.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <png.h>

namespace cellpeel {

namespace {

constexpr const char* kModule = "pipeline-cli";

void on_error(png_structp png, png_const_charp msg) {
  auto* err = static_cast<std::string*>(png_get_error_ptr(png));
  if (err) *err = msg;
  png_longjmp(png, 1);
}

void on_warning(png_structp, png_const_charp) {}

struct Reader {
  const std::string* bytes;
  std::size_t pos = 0;
};

}  // namespace

std::string encode_png_gray8(const std::vector<std::uint8_t>& pixels, std::size_t width, std::size_t height) {
  if (width == 0 || height == 0 || pixels.size() != width * height)
    throw InvalidArgument(kModule, "PNG size does not match the pixel count");
  std::string out, err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, on_error, on_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, nullptr);
    throw ComputeError(kModule, "cannot initialise the PNG encoder");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ComputeError(kModule, "PNG encoding failed: " + err);
  }
  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep data, png_size_t n) {
        static_cast<std::string*>(png_get_io_ptr(p))->append(reinterpret_cast<const char*>(data), n);
      },
      nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t r = 0; r < height; ++r) png_write_row(png, const_cast<png_bytep>(pixels.data() + r * width));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

std::vector<std::uint8_t> window_to_8bit(const std::vector<double>& values, double lo, double hi) {
  std::vector<std::uint8_t> out(values.size());
  const double range = hi > lo ? hi - lo : 1.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = std::clamp((values[i] - lo) / range, 0.0, 1.0);
    out[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return out;
}

Image2D<std::uint8_t> decode_png_gray8(const std::string& bytes) {
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, on_error, on_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw ComputeError(kModule, "cannot initialise the PNG decoder");
  }
  Image2D<std::uint8_t> img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(kModule, "PNG decoding failed: " + err);
  }
  Reader reader{&bytes, 0};
  png_set_read_fn(png, &reader, [](png_structp p, png_bytep data, png_size_t n) {
    auto* r = static_cast<Reader*>(png_get_io_ptr(p));
    if (r->pos + n > r->bytes->size()) png_error(p, "truncated PNG");
    std::memcpy(data, r->bytes->data() + r->pos, n);
    r->pos += n;
  });
  png_read_info(png, info);
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY || png_get_bit_depth(png, info) != 8)
    png_error(png, "not an 8-bit grayscale PNG");
  img = Image2D<std::uint8_t>(png_get_image_width(png, info), png_get_image_height(png, info));
  for (std::size_t r = 0; r < img.height; ++r) png_read_row(png, img.data.data() + r * img.width, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace cellpeel
