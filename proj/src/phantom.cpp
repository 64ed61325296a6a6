#include "cellpeel/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace cellpeel {

namespace {

constexpr const char* kModule = "pipeline-cli";
constexpr double kPi = std::numbers::pi;
constexpr long kSegmentOffset = 64;

struct Frame {
  double cx, cz;
};

Frame centre(const Dims& d) { return {(static_cast<double>(d.nx) - 1) / 2, (static_cast<double>(d.nz) - 1) / 2}; }

double positive_fmod(double a, double m) {
  const double r = std::fmod(a, m);
  return r < 0 ? r + m : r;
}

}  // namespace

void CylinderPhantom::validate() const {
  if (!(r_out > 0) || !(r_in >= 0) || !(r_in < r_out)) throw InvalidArgument(kModule, "phantom needs 0 <= r_in < r_out");
  if (height == 0) throw InvalidArgument(kModule, "phantom height must be positive");
  if (groove_depth < 0 || groove_depth >= r_out)
    throw InvalidArgument(kModule, "groove depth must be in [0, r_out)");
  if (!(groove_half_width > 0) || groove_half_width > kPi) throw InvalidArgument(kModule, "bad groove width");
  if (sectors < 3 || cell_length < 2) throw InvalidArgument(kModule, "cells need >= 3 sectors and length >= 2");
  const Dims d = grid();
  const auto c = centre(d);
  if (std::min(c.cx, c.cz) < r_out) throw InvalidArgument(kModule, "phantom grid too small for r_out");
}

Dims CylinderPhantom::grid() const {
  if (dims) return *dims;
  const auto n = static_cast<std::size_t>(2 * std::ceil(r_out) + 2 * margin + 1);
  return {n, height, n};
}

double CylinderPhantom::groove(double theta) const {
  if (groove_depth <= 0) return 0.0;
  const double delta = std::abs(positive_fmod(theta + kPi / 2 + kPi, 2 * kPi) - kPi);
  return groove_depth * std::max(0.0, 1.0 - delta / groove_half_width);
}

bool CylinderPhantom::in_tissue(double x, double z) const {
  const auto c = centre(grid());
  const double dx = x - c.cx, dz = z - c.cz;
  const double rho = std::hypot(dx, dz);
  const double g = groove(std::atan2(dz, dx));
  return rho > r_in - g && rho <= r_out - g;
}

MaskVolume cylinder_mask(const CylinderPhantom& p) {
  p.validate();
  const Dims d = p.grid();
  MaskVolume m(VolumeMeta{d, p.spacing, p.frame_interval}, 0);
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t x = 0; x < d.nx; ++x) {
      if (!p.in_tissue(static_cast<double>(x), static_cast<double>(z))) continue;
      for (std::size_t y = 0; y < d.ny; ++y) m.at(x, y, z) = 1;
    }
  return m;
}

IntensityVolume cylinder_raw(const CylinderPhantom& p, std::size_t frame) {
  const auto mask = cylinder_mask(p);
  const Dims d = p.grid();
  const auto c = centre(d);
  IntensityVolume raw(mask.meta, 16, 0);
  std::mt19937_64 rng(p.seed * 1000003u + frame);
  const double sector_angle = 2 * kPi / static_cast<double>(p.sectors);
  const double L = static_cast<double>(p.cell_length);
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x) {
        const auto noise = static_cast<std::uint16_t>(rng() % (static_cast<std::uint64_t>(p.noise) + 1));
        if (!mask.at(x, y, z)) {
          raw.at(x, y, z) = static_cast<std::uint16_t>(100 + noise);
          continue;
        }
        const double dx = static_cast<double>(x) - c.cx, dz = static_cast<double>(z) - c.cz;
        const double u = (std::atan2(dz, dx) + kPi) / sector_angle;
        const double frac = u - std::floor(u);
        const double d_arc = std::min(frac, 1 - frac) * sector_angle * std::hypot(dx, dz);
        const double m = positive_fmod(static_cast<double>(y) - p.shift * static_cast<double>(frame), L);
        const double d_y = std::min(m, L - m);
        const bool membrane = d_arc < 1.0 || d_y < 0.5;
        raw.at(x, y, z) = static_cast<std::uint16_t>((membrane ? 2000 : 400) + noise);
      }
  return raw;
}

LabelVolume cylinder_labels(const CylinderPhantom& p, std::size_t frame) {
  const auto mask = cylinder_mask(p);
  const Dims d = p.grid();
  const auto c = centre(d);
  LabelVolume labels(mask.meta, 0);
  const double sector_angle = 2 * kPi / static_cast<double>(p.sectors);
  const double L = static_cast<double>(p.cell_length);
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t x = 0; x < d.nx; ++x) {
      if (!mask.at(x, 0, z)) continue;
      const double theta = std::atan2(static_cast<double>(z) - c.cz, static_cast<double>(x) - c.cx);
      const auto s = std::min(static_cast<long>(std::floor((theta + kPi) / sector_angle)),
                              static_cast<long>(p.sectors) - 1);
      for (std::size_t y = 0; y < d.ny; ++y) {
        const long seg = static_cast<long>(std::floor((static_cast<double>(y) - p.shift * static_cast<double>(frame)) / L));
        if (seg + kSegmentOffset < 0) throw InvalidArgument(kModule, "phantom shifted too far for its label range");
        labels.at(x, y, z) = static_cast<std::uint32_t>(1 + s + static_cast<long>(p.sectors) * (seg + kSegmentOffset));
      }
    }
  return labels;
}

AnnotationSet cylinder_annotations(const CylinderPhantom& p, std::size_t every, std::size_t vertices) {
  p.validate();
  if (every == 0 || vertices < 3) throw InvalidArgument(kModule, "bad annotation spacing or vertex count");
  const Dims d = p.grid();
  const auto c = centre(d);
  AnnotationSet set;
  set.dims = d;
  auto ring = [&](double radius) {
    Polygon poly;
    for (std::size_t k = 0; k < vertices; ++k) {
      const double theta = -kPi + 2 * kPi * static_cast<double>(k) / static_cast<double>(vertices);
      const double r = radius - p.groove(theta);
      poly.push_back({c.cx + r * std::cos(theta), c.cz + r * std::sin(theta)});
    }
    return poly;
  };
  for (std::size_t y = 0; y < d.ny; y += every) {
    SliceAnnotation a;
    a.slice_index = y;
    a.outer = ring(p.r_out + 1);
    if (p.r_in - 1 - p.groove_depth > 0.5) a.inner = ring(p.r_in - 1);
    set.slices.push_back(std::move(a));
  }
  if (set.slices.back().slice_index != d.ny - 1) {
    auto last = set.slices.back();
    last.slice_index = d.ny - 1;
    set.slices.push_back(std::move(last));
  }
  return set;
}

std::vector<LabelVolume> translated_boxes(const Dims& dims, std::size_t n_frames, int shift, std::size_t box,
                                          std::size_t pitch, std::size_t offset) {
  if (box == 0 || pitch < box) throw InvalidArgument(kModule, "boxes need 0 < box <= pitch");
  std::vector<std::array<long, 3>> origins;
  for (std::size_t z = offset; z < dims.nz; z += pitch)
    for (std::size_t y = offset; y < dims.ny; y += pitch)
      for (std::size_t x = offset; x < dims.nx; x += pitch)
        origins.push_back({static_cast<long>(x), static_cast<long>(y), static_cast<long>(z)});
  std::vector<LabelVolume> frames;
  for (std::size_t t = 0; t < n_frames; ++t) {
    LabelVolume v(VolumeMeta{dims, {}, std::nullopt}, 0);
    for (std::size_t k = 0; k < origins.size(); ++k) {
      const long x0 = origins[k][0] + shift * static_cast<long>(t);
      for (long z = origins[k][2]; z < origins[k][2] + static_cast<long>(box); ++z)
        for (long y = origins[k][1]; y < origins[k][1] + static_cast<long>(box); ++y)
          for (long x = x0; x < x0 + static_cast<long>(box); ++x)
            if (v.in_bounds(x, y, z)) v.at(x, y, z) = static_cast<std::uint32_t>(k + 1);
    }
    frames.push_back(std::move(v));
  }
  return frames;
}

MaskVolume digital_sphere(double r, const Spacing& spacing) {
  if (!(r > 0)) throw InvalidArgument(kModule, "sphere radius must be positive");
  const auto n = static_cast<std::size_t>(2 * std::ceil(r) + 3);
  MaskVolume m(VolumeMeta{{n, n, n}, spacing, std::nullopt}, 0);
  const double c = static_cast<double>(n / 2);
  for (std::size_t z = 0; z < n; ++z)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x) {
        const double dx = x - c, dy = y - c, dz = z - c;
        m.at(x, y, z) = dx * dx + dy * dy + dz * dz <= r * r;
      }
  return m;
}

}  // namespace cellpeel
