#include "cellpeel/volume_io.hpp"

#include <tiffio.h>

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

namespace cellpeel {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kModule = "volume-io";

thread_local std::string g_tiff_error;

void capture_tiff_error(const char* module, const char* fmt, va_list ap) {
  char buf[512];
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  g_tiff_error = module ? std::string(module) + ": " + buf : std::string(buf);
}

void ignore_tiff_warning(const char*, const char*, va_list) {}

void install_tiff_handlers() {
  static const bool installed = [] {
    TIFFSetErrorHandler(capture_tiff_error);
    TIFFSetWarningHandler(ignore_tiff_warning);
    return true;
  }();
  (void)installed;
}

struct TiffCloser {
  void operator()(TIFF* t) const {
    if (t) TIFFClose(t);
  }
};
using TiffPtr = std::unique_ptr<TIFF, TiffCloser>;

std::optional<double> imagej_z_spacing(TIFF* tif) {
  char* desc = nullptr;
  if (!TIFFGetField(tif, TIFFTAG_IMAGEDESCRIPTION, &desc) || !desc) return std::nullopt;
  std::istringstream in(desc);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("spacing=", 0) == 0) {
      try {
        double v = std::stod(line.substr(8));
        if (v > 0) return v;
      } catch (const std::exception&) {
        return std::nullopt;
      }
    }
  }
  return std::nullopt;
}

std::optional<Spacing> tag_spacing(TIFF* tif) {
  float xres = 0, yres = 0;
  if (!TIFFGetField(tif, TIFFTAG_XRESOLUTION, &xres) || !(xres > 0)) return std::nullopt;
  if (!TIFFGetField(tif, TIFFTAG_YRESOLUTION, &yres) || !(yres > 0)) yres = xres;
  std::uint16_t unit = RESUNIT_NONE;
  TIFFGetFieldDefaulted(tif, TIFFTAG_RESOLUTIONUNIT, &unit);
  // Unitless resolution follows the ImageJ convention of pixels per micron.
  double per_unit_um = 1.0;
  if (unit == RESUNIT_CENTIMETER) per_unit_um = 1e4;
  if (unit == RESUNIT_INCH) per_unit_um = 25400.0;
  Spacing s;
  s.x = per_unit_um / xres;
  s.y = per_unit_um / yres;
  s.z = imagej_z_spacing(tif).value_or(1.0);
  return s;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

VolumeMeta meta_from(const detail::RawTiff& raw, const fs::path& path) {
  VolumeMeta meta;
  meta.dims = {raw.width, raw.height, raw.pages};
  auto side = read_sidecar(path);
  if (side && side->spacing) {
    meta.spacing = *side->spacing;
  } else if (raw.tag_spacing) {
    meta.spacing = *raw.tag_spacing;
  } else {
    std::clog << "warning: no spacing metadata for " << path.string() << ", assuming 1 um\n";
  }
  if (side) meta.frame_interval = side->frame_interval_s;
  meta.validate();
  return meta;
}

template <typename T>
void write_sidecar_for(const Grid3<T>& vol, const fs::path& path) {
  SidecarMeta side;
  side.spacing = vol.meta.spacing;
  side.frame_interval_s = vol.meta.frame_interval;
  write_sidecar(path, side);
}

}  // namespace

namespace detail {

RawTiff read_tiff(const fs::path& path, bool allow_multisample) {
  install_tiff_handlers();
  if (!fs::exists(path)) throw IoError(kModule, "cannot open " + path.string() + ": no such file");
  g_tiff_error.clear();
  TiffPtr tif(TIFFOpen(path.string().c_str(), "r"));
  if (!tif) throw FormatError(kModule, "not a readable TIFF: " + path.string() + " (" + g_tiff_error + ")");

  RawTiff raw;
  raw.tag_spacing = tag_spacing(tif.get());
  std::vector<unsigned char> line;
  do {
    std::uint32_t w = 0, h = 0;
    std::uint16_t bits = 0, samples = 1, planar = PLANARCONFIG_CONTIG, photometric = PHOTOMETRIC_MINISBLACK;
    TIFFGetField(tif.get(), TIFFTAG_IMAGEWIDTH, &w);
    TIFFGetField(tif.get(), TIFFTAG_IMAGELENGTH, &h);
    TIFFGetFieldDefaulted(tif.get(), TIFFTAG_BITSPERSAMPLE, &bits);
    TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLESPERPIXEL, &samples);
    TIFFGetFieldDefaulted(tif.get(), TIFFTAG_PLANARCONFIG, &planar);
    TIFFGetFieldDefaulted(tif.get(), TIFFTAG_PHOTOMETRIC, &photometric);
    if (w == 0 || h == 0) throw FormatError(kModule, "empty page in " + path.string());
    if (photometric == PHOTOMETRIC_RGB || photometric == PHOTOMETRIC_PALETTE || photometric == PHOTOMETRIC_YCBCR)
      throw FormatError(kModule, "colour TIFF pages are not supported: " + path.string());
    if (samples != 1 && !allow_multisample)
      throw FormatError(kModule, "multi-sample TIFF pages are not supported: " + path.string());
    if (bits != 8 && bits != 16 && bits != 32)
      throw FormatError(kModule, "unsupported bit depth " + std::to_string(bits) + " in " + path.string());
    if (TIFFIsTiled(tif.get())) throw FormatError(kModule, "tiled TIFF is not supported: " + path.string());
    if (raw.pages == 0) {
      raw.width = w;
      raw.height = h;
      raw.bits = bits;
      raw.samples = samples;
    } else if (w != raw.width || h != raw.height) {
      throw FormatError(kModule, "pages of differing size in " + path.string());
    } else if (bits != raw.bits) {
      throw FormatError(kModule, "mixed bit depths in " + path.string());
    } else if (samples != raw.samples) {
      throw FormatError(kModule, "mixed samples per pixel in " + path.string());
    }

    const std::size_t bytes = bits / 8;
    const std::size_t plane = static_cast<std::size_t>(w) * h;
    const std::size_t base = raw.values.size();
    raw.values.resize(base + plane * samples);
    line.resize(static_cast<std::size_t>(TIFFScanlineSize(tif.get())));
    auto sample_at = [&](std::size_t i) -> std::uint32_t {
      switch (bytes) {
        case 1: return line[i];
        case 2: return reinterpret_cast<const std::uint16_t*>(line.data())[i];
        default: return reinterpret_cast<const std::uint32_t*>(line.data())[i];
      }
    };
    const std::size_t passes = planar == PLANARCONFIG_SEPARATE ? samples : 1;
    for (std::size_t s = 0; s < passes; ++s) {
      for (std::uint32_t row = 0; row < h; ++row) {
        if (TIFFReadScanline(tif.get(), line.data(), row, static_cast<std::uint16_t>(s)) < 0)
          throw FormatError(kModule, "corrupt TIFF data in " + path.string() + " (" + g_tiff_error + ")");
        for (std::uint32_t col = 0; col < w; ++col) {
          if (passes == samples) {
            raw.values[base + s * plane + row * w + col] = sample_at(col);
          } else {
            for (std::size_t c = 0; c < samples; ++c)
              raw.values[base + c * plane + row * w + col] = sample_at(col * samples + c);
          }
        }
      }
    }
    ++raw.pages;
  } while (TIFFReadDirectory(tif.get()));

  if (raw.pages == 0) throw FormatError(kModule, "TIFF has no pages: " + path.string());
  return raw;
}

void write_tiff(const fs::path& path, std::size_t width, std::size_t height, std::size_t pages,
                std::size_t samples, int bits, const std::vector<std::uint32_t>& values,
                const Spacing& spacing) {
  install_tiff_handlers();
  const std::size_t plane = width * height;
  if (values.size() != plane * pages * samples)
    throw InvalidArgument(kModule, "pixel buffer does not match TIFF geometry");
  g_tiff_error.clear();
  TiffPtr tif(TIFFOpen(path.string().c_str(), plane * pages * samples * (bits / 8) > (1ull << 31) ? "w8" : "w"));
  if (!tif) throw IoError(kModule, "cannot write " + path.string() + " (" + g_tiff_error + ")");

  const std::string description = "ImageJ=1.11a\nimages=" + std::to_string(pages) +
                                  "\nslices=" + std::to_string(pages) +
                                  "\nunit=micron\nspacing=" + fmt_double(spacing.z) + "\nloop=false\n";
  const std::size_t bytes = static_cast<std::size_t>(bits) / 8;
  std::vector<unsigned char> buf(plane * bytes);
  for (std::size_t p = 0; p < pages; ++p) {
    TIFF* t = tif.get();
    TIFFSetField(t, TIFFTAG_IMAGEWIDTH, static_cast<std::uint32_t>(width));
    TIFFSetField(t, TIFFTAG_IMAGELENGTH, static_cast<std::uint32_t>(height));
    TIFFSetField(t, TIFFTAG_BITSPERSAMPLE, static_cast<std::uint16_t>(bits));
    TIFFSetField(t, TIFFTAG_SAMPLESPERPIXEL, static_cast<std::uint16_t>(samples));
    TIFFSetField(t, TIFFTAG_SAMPLEFORMAT, SAMPLEFORMAT_UINT);
    TIFFSetField(t, TIFFTAG_PHOTOMETRIC, PHOTOMETRIC_MINISBLACK);
    TIFFSetField(t, TIFFTAG_PLANARCONFIG, samples > 1 ? PLANARCONFIG_SEPARATE : PLANARCONFIG_CONTIG);
    TIFFSetField(t, TIFFTAG_COMPRESSION, COMPRESSION_NONE);
    TIFFSetField(t, TIFFTAG_ROWSPERSTRIP, static_cast<std::uint32_t>(height));
    TIFFSetField(t, TIFFTAG_XRESOLUTION, static_cast<float>(1.0 / spacing.x));
    TIFFSetField(t, TIFFTAG_YRESOLUTION, static_cast<float>(1.0 / spacing.y));
    TIFFSetField(t, TIFFTAG_RESOLUTIONUNIT, RESUNIT_NONE);
    if (samples > 1) {
      std::vector<std::uint16_t> extra(samples - 1, EXTRASAMPLE_UNSPECIFIED);
      TIFFSetField(t, TIFFTAG_EXTRASAMPLES, static_cast<std::uint16_t>(extra.size()), extra.data());
    }
    if (pages > 1) {
      TIFFSetField(t, TIFFTAG_SUBFILETYPE, FILETYPE_PAGE);
      TIFFSetField(t, TIFFTAG_PAGENUMBER, static_cast<std::uint16_t>(p), static_cast<std::uint16_t>(pages));
    }
    if (p == 0 && samples == 1) TIFFSetField(t, TIFFTAG_IMAGEDESCRIPTION, description.c_str());

    for (std::size_t s = 0; s < samples; ++s) {
      const std::uint32_t* src = values.data() + (p * samples + s) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        switch (bytes) {
          case 1: buf[i] = static_cast<unsigned char>(src[i]); break;
          case 2: reinterpret_cast<std::uint16_t*>(buf.data())[i] = static_cast<std::uint16_t>(src[i]); break;
          default: reinterpret_cast<std::uint32_t*>(buf.data())[i] = src[i]; break;
        }
      }
      if (TIFFWriteEncodedStrip(t, static_cast<tstrip_t>(s), buf.data(), static_cast<tmsize_t>(buf.size())) < 0)
        throw IoError(kModule, "write failed for " + path.string() + " (" + g_tiff_error + ")");
    }
    if (!TIFFWriteDirectory(t)) throw IoError(kModule, "write failed for " + path.string() + " (" + g_tiff_error + ")");
  }
}

}  // namespace detail

fs::path sidecar_path(const fs::path& stack) {
  return stack.parent_path() / (stack.stem().string() + ".meta.json");
}

std::optional<SidecarMeta> read_sidecar(const fs::path& stack) {
  const auto p = sidecar_path(stack);
  if (!fs::exists(p)) return std::nullopt;
  std::ifstream in(p);
  if (!in) throw IoError(kModule, "cannot read " + p.string());
  SidecarMeta meta;
  try {
    json j = json::parse(in);
    if (j.contains("spacing") && !j["spacing"].is_null()) {
      const auto& s = j["spacing"];
      if (!s.is_array() || s.size() != 3) throw FormatError(kModule, "sidecar spacing must be an array of 3 numbers");
      meta.spacing = Spacing{s[0].get<double>(), s[1].get<double>(), s[2].get<double>()};
    }
    if (j.contains("frame_interval_s") && !j["frame_interval_s"].is_null())
      meta.frame_interval_s = j["frame_interval_s"].get<double>();
    if (j.contains("row_lengths")) meta.row_lengths = j["row_lengths"].get<std::vector<std::size_t>>();
    if (j.contains("first_slice")) meta.first_slice = j["first_slice"].get<std::size_t>();
  } catch (const json::exception& e) {
    throw FormatError(kModule, "bad sidecar " + p.string() + ": " + e.what());
  }
  return meta;
}

void write_sidecar(const fs::path& stack, const SidecarMeta& meta) {
  json j = json::object();
  if (meta.spacing) j["spacing"] = {meta.spacing->x, meta.spacing->y, meta.spacing->z};
  if (meta.frame_interval_s) j["frame_interval_s"] = *meta.frame_interval_s;
  if (meta.row_lengths) j["row_lengths"] = *meta.row_lengths;
  if (meta.first_slice) j["first_slice"] = *meta.first_slice;
  const auto p = sidecar_path(stack);
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(kModule, "cannot write " + p.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError(kModule, "write failed for " + p.string());
}

IntensityVolume load_stack(const fs::path& path) {
  auto raw = detail::read_tiff(path, false);
  if (raw.bits == 32) throw FormatError(kModule, "intensity stacks must be 8- or 16-bit: " + path.string());
  IntensityVolume vol(meta_from(raw, path), raw.bits);
  std::transform(raw.values.begin(), raw.values.end(), vol.data.begin(),
                 [](std::uint32_t v) { return static_cast<std::uint16_t>(v); });
  return vol;
}

LabelVolume load_labels(const fs::path& path) {
  auto raw = detail::read_tiff(path, false);
  LabelVolume vol(meta_from(raw, path));
  vol.data = std::move(raw.values);
  return vol;
}

MaskVolume load_mask(const fs::path& path) {
  auto raw = detail::read_tiff(path, false);
  MaskVolume vol(meta_from(raw, path));
  std::transform(raw.values.begin(), raw.values.end(), vol.data.begin(),
                 [](std::uint32_t v) { return static_cast<std::uint8_t>(v != 0); });
  return vol;
}

void save_stack(const IntensityVolume& vol, const fs::path& path) {
  vol.meta.validate();
  std::vector<std::uint32_t> values(vol.data.begin(), vol.data.end());
  const auto& d = vol.dims();
  detail::write_tiff(path, d.nx, d.ny, d.nz, 1, vol.bits, values, vol.meta.spacing);
  write_sidecar_for(vol, path);
}

void save_stack(const LabelVolume& vol, const fs::path& path) {
  vol.meta.validate();
  const std::uint32_t max_label = vol.data.empty() ? 0 : *std::max_element(vol.data.begin(), vol.data.end());
  const int bits = max_label <= 0xFF ? 8 : max_label <= 0xFFFF ? 16 : 32;
  const auto& d = vol.dims();
  detail::write_tiff(path, d.nx, d.ny, d.nz, 1, bits, vol.data, vol.meta.spacing);
  write_sidecar_for(vol, path);
}

void save_mask(const MaskVolume& vol, const fs::path& path) {
  vol.meta.validate();
  std::vector<std::uint32_t> values(vol.data.size());
  std::transform(vol.data.begin(), vol.data.end(), values.begin(),
                 [](std::uint8_t v) { return v ? 255u : 0u; });
  const auto& d = vol.dims();
  detail::write_tiff(path, d.nx, d.ny, d.nz, 1, 8, values, vol.meta.spacing);
  write_sidecar_for(vol, path);
}

void save_label_image(const LabelImage& img, const fs::path& path) {
  const std::uint32_t max_label = img.data.empty() ? 0 : *std::max_element(img.data.begin(), img.data.end());
  detail::write_tiff(path, img.width, img.height, 1, 1, max_label <= 0xFFFF ? 16 : 32, img.data, Spacing{});
}

LabelImage load_label_image(const fs::path& path) {
  auto raw = detail::read_tiff(path, false);
  if (raw.pages != 1) throw FormatError(kModule, "expected a single-page label image: " + path.string());
  LabelImage img(raw.width, raw.height);
  img.data = std::move(raw.values);
  return img;
}

namespace {

struct AxialPlan {
  std::size_t nz_out;
  double step;  // input slices per output slice
};

AxialPlan plan_axial(const VolumeMeta& meta) {
  const auto& s = meta.spacing;
  if (std::abs(s.x - s.y) > 1e-6)
    throw InvalidArgument(kModule, "lateral spacings differ; isotropic resampling needs sx == sy");
  if (s.z < s.x - 1e-12)
    throw InvalidArgument(kModule, "axial spacing finer than lateral; downsampling is not supported");
  const double ratio = s.z / s.x;
  const auto nz_out = static_cast<std::size_t>(std::llround(static_cast<double>(meta.dims.nz) * ratio));
  return {std::max<std::size_t>(nz_out, 1), s.x / s.z};
}

template <typename In, typename Out, typename Convert>
void resample_z(const Grid3<In>& in, Grid3<Out>& out, double step, Convert convert) {
  const auto& d = in.dims();
  const std::size_t plane = d.nx * d.ny;
  for (std::size_t k = 0; k < out.dims().nz; ++k) {
    const double pos = std::min(static_cast<double>(k) * step, static_cast<double>(d.nz - 1));
    const auto z0 = static_cast<std::size_t>(std::floor(pos));
    const std::size_t z1 = std::min(z0 + 1, d.nz - 1);
    const double a = pos - static_cast<double>(z0);
    const In* s0 = in.data.data() + z0 * plane;
    const In* s1 = in.data.data() + z1 * plane;
    Out* dst = out.data.data() + k * plane;
    for (std::size_t i = 0; i < plane; ++i)
      dst[i] = convert((1.0 - a) * static_cast<double>(s0[i]) + a * static_cast<double>(s1[i]));
  }
}

}  // namespace

IntensityVolume resample_isotropic(const IntensityVolume& vol) {
  vol.meta.validate();
  const auto plan = plan_axial(vol.meta);
  if (plan.nz_out == vol.dims().nz && std::abs(plan.step - 1.0) < 1e-12) {
    IntensityVolume out = vol;
    out.meta.spacing.z = out.meta.spacing.x;
    out.meta.spacing.y = out.meta.spacing.x;
    return out;
  }
  VolumeMeta meta = vol.meta;
  meta.dims.nz = plan.nz_out;
  meta.spacing = {vol.meta.spacing.x, vol.meta.spacing.x, vol.meta.spacing.x};
  IntensityVolume out(meta, vol.bits);
  resample_z(vol, out, plan.step, [](double v) { return static_cast<std::uint16_t>(std::lround(v)); });
  return out;
}

MaskVolume resample_isotropic(const MaskVolume& vol) {
  vol.meta.validate();
  const auto plan = plan_axial(vol.meta);
  VolumeMeta meta = vol.meta;
  meta.dims.nz = plan.nz_out;
  meta.spacing = {vol.meta.spacing.x, vol.meta.spacing.x, vol.meta.spacing.x};
  MaskVolume out(meta);
  resample_z(vol, out, plan.step, [](double v) { return static_cast<std::uint8_t>(v >= 0.5); });
  return out;
}

}  // namespace cellpeel
