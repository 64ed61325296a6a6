#include "cellpeel/masking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cellpeel/shells.hpp"

namespace cellpeel {

namespace {

constexpr const char* kModule = "masking";
constexpr double kEps = 1e-9;

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.z - o.z) - (a.z - o.z) * (b.x - o.x);
}

bool on_segment(const Point2& a, const Point2& b, const Point2& p) {
  const double len = std::hypot(b.x - a.x, b.z - a.z);
  if (std::abs(cross(a, b, p)) > kEps * std::max(1.0, len)) return false;
  return p.x >= std::min(a.x, b.x) - kEps && p.x <= std::max(a.x, b.x) + kEps &&
         p.z >= std::min(a.z, b.z) - kEps && p.z <= std::max(a.z, b.z) + kEps;
}

int orientation(const Point2& a, const Point2& b, const Point2& c) {
  const double v = cross(a, b, c);
  if (std::abs(v) <= kEps) return 0;
  return v > 0 ? 1 : -1;
}

bool segments_intersect(const Point2& p1, const Point2& p2, const Point2& q1, const Point2& q2) {
  const int o1 = orientation(p1, p2, q1), o2 = orientation(p1, p2, q2);
  const int o3 = orientation(q1, q2, p1), o4 = orientation(q1, q2, p2);
  if (o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0) return true;
  return (o1 == 0 && on_segment(p1, p2, q1)) || (o2 == 0 && on_segment(p1, p2, q2)) ||
         (o3 == 0 && on_segment(q1, q2, p1)) || (o4 == 0 && on_segment(q1, q2, p2));
}

void validate_polygon(const Polygon& poly, const char* which) {
  if (poly.size() < 3)
    throw InvalidArgument(kModule, std::string(which) + " polygon needs at least 3 vertices, got " +
                                       std::to_string(poly.size()));
  if (!polygon_is_simple(poly))
    throw InvalidArgument(kModule, std::string(which) + " polygon is self-intersecting");
}

}  // namespace

bool point_on_boundary(const Polygon& poly, double x, double z) {
  const Point2 p{x, z};
  for (std::size_t i = 0, n = poly.size(); i < n; ++i)
    if (on_segment(poly[i], poly[(i + 1) % n], p)) return true;
  return false;
}

bool point_in_polygon(const Polygon& poly, double x, double z) {
  if (point_on_boundary(poly, x, z)) return true;
  bool inside = false;
  for (std::size_t i = 0, n = poly.size(), j = n - 1; i < n; j = i++) {
    const auto& a = poly[i];
    const auto& b = poly[j];
    if ((a.z > z) != (b.z > z) && x < a.x + (z - a.z) * (b.x - a.x) / (b.z - a.z)) inside = !inside;
  }
  return inside;
}

bool polygon_is_simple(const Polygon& poly) {
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i)
    if (poly[i] == poly[(i + 1) % n]) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a1 = poly[i];
    const auto& a2 = poly[(i + 1) % n];
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto& b1 = poly[j];
      const auto& b2 = poly[(j + 1) % n];
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      if (!adjacent) {
        if (segments_intersect(a1, a2, b1, b2)) return false;
        continue;
      }
      // Adjacent edges may only share their common vertex: reject folds back
      // along the same line.
      const Point2& shared = (j == i + 1) ? a2 : a1;
      const Point2& a_other = (j == i + 1) ? a1 : a2;
      const Point2& b_other = (j == i + 1) ? b2 : b1;
      if (orientation(shared, a_other, b_other) == 0) {
        const double dot = (a_other.x - shared.x) * (b_other.x - shared.x) +
                           (a_other.z - shared.z) * (b_other.z - shared.z);
        if (dot > 0) return false;
      }
    }
  }
  return true;
}

void SliceAnnotation::validate() const {
  validate_polygon(outer, "outer");
  if (!inner) return;
  validate_polygon(*inner, "inner");
  for (const auto& v : *inner)
    if (point_on_boundary(outer, v.x, v.z) || !point_in_polygon(outer, v.x, v.z))
      throw InvalidArgument(kModule, "inner polygon is not strictly inside the outer polygon (slice " +
                                         std::to_string(slice_index) + ")");
  for (std::size_t i = 0; i < inner->size(); ++i)
    for (std::size_t j = 0; j < outer.size(); ++j)
      if (segments_intersect((*inner)[i], (*inner)[(i + 1) % inner->size()], outer[j],
                             outer[(j + 1) % outer.size()]))
        throw InvalidArgument(kModule, "inner polygon crosses the outer polygon (slice " +
                                           std::to_string(slice_index) + ")");
}

void AnnotationSet::validate() const {
  if (dims.nx < 1 || dims.ny < 1 || dims.nz < 1) throw InvalidArgument(kModule, "annotation dims must be >= 1");
  if (slices.size() < 2) throw InvalidArgument(kModule, "at least two annotated slices are required");
  for (std::size_t i = 0; i < slices.size(); ++i) {
    if (slices[i].slice_index >= dims.ny)
      throw InvalidArgument(kModule, "annotated slice " + std::to_string(slices[i].slice_index) + " outside [0, ny)");
    if (i > 0 && slices[i].slice_index <= slices[i - 1].slice_index)
      throw InvalidArgument(kModule, "annotated slice indices must be strictly increasing");
    slices[i].validate();
  }
}

Mask2D rasterize_annotation(const SliceAnnotation& ann, std::size_t nx, std::size_t nz) {
  ann.validate();
  Mask2D out(nx, nz, 0);
  for (std::size_t z = 0; z < nz; ++z)
    for (std::size_t x = 0; x < nx; ++x) {
      const double px = static_cast<double>(x), pz = static_cast<double>(z);
      if (!point_in_polygon(ann.outer, px, pz)) continue;
      if (ann.inner && point_in_polygon(*ann.inner, px, pz)) continue;
      out.at(x, z) = 1;
    }
  return out;
}

Image2D<double> signed_distance(const Mask2D& mask) {
  // Stand-in for an unbounded distance when one phase is absent.
  const double far = static_cast<double>(mask.width + mask.height) * 4.0;
  Mask2D inverted(mask.width, mask.height);
  for (std::size_t i = 0; i < mask.size(); ++i) inverted.data[i] = mask.data[i] ? 0 : 1;
  const auto to_bg = euclidean_distance_map_2d(mask, false);
  const auto to_fg = euclidean_distance_map_2d(inverted, false);
  Image2D<double> out(mask.width, mask.height);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask.data[i]) out.data[i] = std::isinf(to_bg.data[i]) ? far : to_bg.data[i] - 1.0;
    else out.data[i] = std::isinf(to_fg.data[i]) ? -far : -to_fg.data[i];
  }
  return out;
}

MaskVolume interpolate_masks(const AnnotationSet& annotations, const Spacing& spacing) {
  annotations.validate();
  const auto& d = annotations.dims;
  VolumeMeta meta{d, spacing, std::nullopt};
  meta.validate();
  MaskVolume out(meta, 0);

  std::vector<Mask2D> raster;
  raster.reserve(annotations.slices.size());
  for (const auto& s : annotations.slices) raster.push_back(rasterize_annotation(s, d.nx, d.nz));

  for (std::size_t k = 0; k < raster.size(); ++k) set_xz_slice(out, annotations.slices[k].slice_index, raster[k]);

  Image2D<double> lo_dist = signed_distance(raster.front());
  for (std::size_t k = 0; k + 1 < raster.size(); ++k) {
    Image2D<double> hi_dist = signed_distance(raster[k + 1]);
    const std::size_t a = annotations.slices[k].slice_index;
    const std::size_t b = annotations.slices[k + 1].slice_index;
    for (std::size_t y = a + 1; y < b; ++y) {
      const double alpha = static_cast<double>(y - a) / static_cast<double>(b - a);
      for (std::size_t z = 0; z < d.nz; ++z)
        for (std::size_t x = 0; x < d.nx; ++x) {
          const double v = (1.0 - alpha) * lo_dist.at(x, z) + alpha * hi_dist.at(x, z);
          out.at(x, y, z) = v >= 0.0;
        }
    }
    lo_dist = std::move(hi_dist);
  }

  if (std::none_of(out.data.begin(), out.data.end(), [](std::uint8_t v) { return v != 0; }))
    throw ComputeError(kModule, "annotations rasterize to an empty mask");
  return out;
}

MaskVolume mask_surface(const MaskVolume& mask) {
  MaskVolume out(mask.meta, 0);
  const auto& d = mask.dims();
  const auto offsets = neighbour_offsets_3d(6);
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x) {
        if (!mask.at(x, y, z)) continue;
        for (const auto& o : offsets) {
          const long nx = static_cast<long>(x) + o[0], ny = static_cast<long>(y) + o[1],
                     nz = static_cast<long>(z) + o[2];
          if (!mask.in_bounds(nx, ny, nz) || !mask.at(nx, ny, nz)) {
            out.at(x, y, z) = 1;
            break;
          }
        }
      }
  return out;
}

IntensityVolume apply_mask_with_margin(const IntensityVolume& raw, const MaskVolume& mask) {
  if (!(raw.dims() == mask.dims())) throw InvalidArgument(kModule, "raw image and mask dimensions differ");
  const auto surface = mask_surface(mask);
  IntensityVolume out(raw.meta, raw.bits, 0);
  const std::uint16_t barrier = raw.max_value();
  for (std::size_t i = 0; i < raw.data.size(); ++i) {
    if (!mask.data[i]) continue;
    out.data[i] = surface.data[i] ? barrier : raw.data[i];
  }
  return out;
}

}  // namespace cellpeel
