#include "cellpeel/shells.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace cellpeel {

namespace {

constexpr const char* kModule = "shells";
constexpr double kInf = std::numeric_limits<double>::infinity();

// One pass of the lower-envelope distance transform over a strided line.
class EnvelopePass {
 public:
  explicit EnvelopePass(std::size_t max_n) : f_(max_n), v_(max_n), z_(max_n + 1) {}

  void run(double* line, std::size_t n, std::size_t stride) {
    for (std::size_t q = 0; q < n; ++q) f_[q] = line[q * stride];
    long k = -1;
    for (std::size_t q = 0; q < n; ++q) {
      if (f_[q] == kInf) continue;
      const double fq = f_[q] + static_cast<double>(q) * static_cast<double>(q);
      if (k < 0) {
        k = 0;
        v_[0] = q;
        z_[0] = -kInf;
        z_[1] = kInf;
        continue;
      }
      // z_[0] is -inf, so the envelope never empties.
      double s;
      for (;;) {
        const double p = static_cast<double>(v_[k]);
        s = (fq - (f_[v_[k]] + p * p)) / (2.0 * static_cast<double>(q) - 2.0 * p);
        if (s > z_[k]) break;
        --k;
      }
      ++k;
      v_[k] = q;
      z_[k] = s;
      z_[k + 1] = kInf;
    }
    if (k < 0) {
      for (std::size_t q = 0; q < n; ++q) line[q * stride] = kInf;
      return;
    }
    long j = 0;
    for (std::size_t q = 0; q < n; ++q) {
      while (z_[j + 1] < static_cast<double>(q)) ++j;
      const double d = static_cast<double>(q) - static_cast<double>(v_[j]);
      line[q * stride] = d * d + f_[v_[j]];
    }
  }

 private:
  std::vector<double> f_;
  std::vector<std::size_t> v_;
  std::vector<double> z_;
};

}  // namespace

std::vector<double> squared_distance_to_zero(const std::vector<std::uint8_t>& feature, const Dims& d,
                                             const EdmBoundary& boundary) {
  std::vector<double> dist(feature.size());
  for (std::size_t i = 0; i < feature.size(); ++i) dist[i] = feature[i] ? kInf : 0.0;

  EnvelopePass pass(std::max({d.nx, d.ny, d.nz}));
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = 0; y < d.ny; ++y) pass.run(dist.data() + d.nx * (y + d.ny * z), d.nx, 1);
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t x = 0; x < d.nx; ++x) pass.run(dist.data() + x + d.nx * d.ny * z, d.ny, d.nx);
  for (std::size_t y = 0; y < d.ny; ++y)
    for (std::size_t x = 0; x < d.nx; ++x) pass.run(dist.data() + x + d.nx * y, d.nz, d.nx * d.ny);

  // The nearest voxel beyond a closed face always lies straight across it.
  auto face = [](std::size_t c, std::size_t n) {
    const double a = static_cast<double>(c + 1), b = static_cast<double>(n - c);
    return std::min(a * a, b * b);
  };
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x) {
        double& v = dist[x + d.nx * (y + d.ny * z)];
        if (boundary.x_closed) v = std::min(v, face(x, d.nx));
        if (boundary.y_closed) v = std::min(v, face(y, d.ny));
        if (boundary.z_closed) v = std::min(v, face(z, d.nz));
      }
  return dist;
}

DistanceVolume euclidean_distance_map(const MaskVolume& mask, const EdmBoundary& boundary) {
  if (std::none_of(mask.data.begin(), mask.data.end(), [](std::uint8_t v) { return v != 0; }))
    throw InvalidArgument(kModule, "distance map of an empty mask");
  DistanceVolume out;
  out.meta = mask.meta;
  out.data = squared_distance_to_zero(mask.data, mask.dims(), boundary);
  for (auto& v : out.data) v = std::sqrt(v);
  return out;
}

Image2D<double> euclidean_distance_map_2d(const Mask2D& mask, bool border_is_background) {
  Image2D<double> out(mask.width, mask.height);
  const Dims d{mask.width, mask.height, 1};
  EdmBoundary b{border_is_background, border_is_background, false};
  out.data = squared_distance_to_zero(mask.data, d, b);
  for (auto& v : out.data) v = std::sqrt(v);
  return out;
}

std::vector<std::array<int, 3>> neighbour_offsets_3d(int connectivity) {
  if (connectivity != 6 && connectivity != 18 && connectivity != 26)
    throw InvalidArgument(kModule, "3D connectivity must be 6, 18 or 26");
  std::vector<std::array<int, 3>> out;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int order = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (order == 0) continue;
        if (connectivity == 6 && order > 1) continue;
        if (connectivity == 18 && order > 2) continue;
        out.push_back({dx, dy, dz});
      }
  return out;
}

std::vector<std::array<int, 2>> neighbour_offsets_2d(int connectivity) {
  if (connectivity == 4) return {{0, -1}, {-1, 0}, {1, 0}, {0, 1}};
  if (connectivity == 8) return {{-1, -1}, {0, -1}, {1, -1}, {-1, 0}, {1, 0}, {-1, 1}, {0, 1}, {1, 1}};
  throw InvalidArgument(kModule, "2D connectivity must be 4 or 8");
}

LabelVolume connected_components(const MaskVolume& mask, int connectivity) {
  const auto offsets = neighbour_offsets_3d(connectivity);
  LabelVolume labels(mask.meta, 0);
  std::vector<std::size_t> stack;
  std::uint32_t next = 0;
  for (std::size_t i = 0; i < mask.data.size(); ++i) {
    if (!mask.data[i] || labels.data[i]) continue;
    labels.data[i] = ++next;
    stack.assign(1, i);
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      const auto [x, y, z] = mask.coords(cur);
      for (const auto& o : offsets) {
        const long nx = static_cast<long>(x) + o[0], ny = static_cast<long>(y) + o[1],
                   nz = static_cast<long>(z) + o[2];
        if (!mask.in_bounds(nx, ny, nz)) continue;
        const std::size_t n = mask.index(nx, ny, nz);
        if (mask.data[n] && !labels.data[n]) {
          labels.data[n] = next;
          stack.push_back(n);
        }
      }
    }
  }
  return labels;
}

LabelImage connected_components(const Mask2D& mask, int connectivity) {
  const auto offsets = neighbour_offsets_2d(connectivity);
  LabelImage labels(mask.width, mask.height, 0);
  std::vector<std::size_t> stack;
  std::uint32_t next = 0;
  for (std::size_t i = 0; i < mask.data.size(); ++i) {
    if (!mask.data[i] || labels.data[i]) continue;
    labels.data[i] = ++next;
    stack.assign(1, i);
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      const long c = static_cast<long>(cur % mask.width), r = static_cast<long>(cur / mask.width);
      for (const auto& o : offsets) {
        if (!mask.in_bounds(c + o[0], r + o[1])) continue;
        const std::size_t n = static_cast<std::size_t>(c + o[0]) + mask.width * static_cast<std::size_t>(r + o[1]);
        if (mask.data[n] && !labels.data[n]) {
          labels.data[n] = next;
          stack.push_back(n);
        }
      }
    }
  }
  return labels;
}

std::uint32_t label_count(const LabelVolume& labels) {
  return labels.data.empty() ? 0 : *std::max_element(labels.data.begin(), labels.data.end());
}

void ShellParams::validate() const {
  if (!(tol >= 0.0) || !(t > tol)) throw InvalidArgument(kModule, "shell parameters need t > tol >= 0");
  neighbour_offsets_3d(connectivity);
}

ShellPair extract_shells(const DistanceVolume& edm, const ShellParams& params) {
  params.validate();
  MaskVolume band(edm.meta, 0);
  const double lo = params.t - params.tol, hi = params.t + params.tol;
  for (std::size_t i = 0; i < edm.data.size(); ++i) band.data[i] = edm.data[i] >= lo && edm.data[i] <= hi;

  const auto labels = connected_components(band, params.connectivity);
  const std::uint32_t k = label_count(labels);
  std::vector<std::size_t> sizes(k + 1, 0);
  for (auto l : labels.data) ++sizes[l];

  // Labels follow first-voxel scan order, so label value breaks size ties.
  std::vector<std::uint32_t> order(k);
  std::iota(order.begin(), order.end(), 1u);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return sizes[a] > sizes[b]; });

  if (k < 2)
    throw ComputeError(kModule, "distance band has " + std::to_string(k) +
                                    " connected component(s); apical and basal shells need at least 2");

  ShellPair out;
  out.diagnostics.component_count = k;
  for (auto l : order) out.diagnostics.component_sizes.push_back(sizes[l]);
  out.apical = MaskVolume(edm.meta, 0);
  out.basal = MaskVolume(edm.meta, 0);
  out.distance = edm;
  for (std::size_t i = 0; i < labels.data.size(); ++i) {
    if (labels.data[i] == order[0]) out.apical.data[i] = 1;
    else if (labels.data[i] == order[1]) out.basal.data[i] = 1;
  }
  return out;
}

ShellPair shells_from_mask(const MaskVolume& mask, const ShellParams& params) {
  const auto& d = mask.dims();
  std::size_t y0 = d.ny, y1 = 0;
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x)
        if (mask.at(x, y, z)) {
          y0 = std::min(y0, y);
          y1 = std::max(y1, y);
        }
  if (y0 > y1) throw InvalidArgument(kModule, "distance map of an empty mask");

  VolumeMeta sub_meta = mask.meta;
  sub_meta.dims.ny = y1 - y0 + 1;
  MaskVolume sub(sub_meta, 0);
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = y0; y <= y1; ++y)
      for (std::size_t x = 0; x < d.nx; ++x) sub.at(x, y - y0, z) = mask.at(x, y, z);

  auto pair = extract_shells(euclidean_distance_map(sub, EdmBoundary{true, false, true}), params);
  ShellPair out;
  out.diagnostics = pair.diagnostics;
  out.apical = MaskVolume(mask.meta, 0);
  out.basal = MaskVolume(mask.meta, 0);
  out.distance = DistanceVolume(mask.meta, 0.0);
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = y0; y <= y1; ++y)
      for (std::size_t x = 0; x < d.nx; ++x) {
        out.apical.at(x, y, z) = pair.apical.at(x, y - y0, z);
        out.basal.at(x, y, z) = pair.basal.at(x, y - y0, z);
        out.distance.at(x, y, z) = pair.distance.at(x, y - y0, z);
      }
  return out;
}

}  // namespace cellpeel
