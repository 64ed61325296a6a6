#include "cellpeel/quantify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <tuple>
#include <unordered_map>

#include <Eigen/Dense>

#include "cellpeel/shells.hpp"

namespace cellpeel {

namespace {

constexpr const char* kModule = "quantify";

using Points = std::vector<std::array<double, 3>>;

// Plane of a patch is usable when its second variance is not negligible.
bool has_plane(const PrincipalAxes& pa) {
  return pa.variances[1] > 1e-12 * std::max(pa.variances[0], 1e-300) && pa.variances[1] > 1e-18;
}

double dot(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

}  // namespace

void FeatureTable::validate() const {
  std::set<std::tuple<std::uint32_t, std::size_t, std::string>> keys;
  for (const auto& r : rows) {
    if (r.unit.empty()) throw InvalidArgument(kModule, "feature '" + r.feature + "' has no unit");
    if (!keys.insert({r.track_id, r.frame, r.feature}).second)
      throw InvalidArgument(kModule, "duplicate feature '" + r.feature + "' for track " + std::to_string(r.track_id) +
                                         " frame " + std::to_string(r.frame));
  }
}

void FeatureTable::sort() {
  std::stable_sort(rows.begin(), rows.end(), [](const FeatureRow& a, const FeatureRow& b) {
    return std::tie(a.track_id, a.frame, a.feature) < std::tie(b.track_id, b.frame, b.feature);
  });
}

void FeatureTable::append(const FeatureTable& other) { rows.insert(rows.end(), other.rows.begin(), other.rows.end()); }

const FeatureRow* FeatureTable::find(std::uint32_t track_id, std::size_t frame, const std::string& feature) const {
  for (const auto& r : rows)
    if (r.track_id == track_id && r.frame == frame && r.feature == feature) return &r;
  return nullptr;
}

void QuantifyParams::validate() const {
  if (shell_radius < 1) throw InvalidArgument(kModule, "shell radius must be >= 1");
  if (plane_cell && !(*plane_cell > 0)) throw InvalidArgument(kModule, "plane cell size must be positive");
}

PrincipalAxes principal_axes(const Points& points) {
  if (points.empty()) throw InvalidArgument(kModule, "principal axes of an empty point set");
  PrincipalAxes out;
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : points) mean += Eigen::Vector3d(p[0], p[1], p[2]);
  mean /= static_cast<double>(points.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) {
    const Eigen::Vector3d d = Eigen::Vector3d(p[0], p[1], p[2]) - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(points.size());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  for (int k = 0; k < 3; ++k) {
    const int src = 2 - k;  // solver sorts ascending
    Eigen::Vector3d v = solver.eigenvectors().col(src);
    for (int c = 0; c < 3; ++c) {
      if (std::abs(v[c]) > 1e-12) {
        if (v[c] < 0) v = -v;
        break;
      }
    }
    out.variances[k] = std::max(0.0, solver.eigenvalues()[src]);
    out.axes[k] = {v[0], v[1], v[2]};
  }
  out.mean = {mean[0], mean[1], mean[2]};
  return out;
}

FeatureTable features_2d(const LabelImage& labels, const PeelImage& peel, const TrackTable& tracks, std::size_t frame,
                         std::optional<double> frame_interval) {
  if (labels.width != peel.width || labels.height != peel.height)
    throw InvalidArgument(kModule, "label image and peel dimensions differ");
  struct Acc {
    double area = 0, n = 0, sc = 0, sr = 0, scc = 0, srr = 0, scr = 0;
  };
  std::map<std::uint32_t, Acc> acc;
  const double pixel_area = peel.spacing.x * peel.spacing.y;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto l = labels.data[i];
    if (!l) continue;
    auto& a = acc[l];
    const double c = static_cast<double>(i % labels.width), r = static_cast<double>(i / labels.width);
    a.area += peel.metric[i] * pixel_area;
    a.n += 1;
    a.sc += c;
    a.sr += r;
    a.scc += c * c;
    a.srr += r * r;
    a.scr += c * r;
  }

  FeatureTable out;
  for (const auto* row : tracks.frame_rows(frame)) {
    auto it = acc.find(row->label);
    if (it == acc.end())
      throw ComputeError(kModule, "track " + std::to_string(row->track_id) + " references label " +
                                      std::to_string(row->label) + " missing from frame " + std::to_string(frame));
    const auto& a = it->second;
    const double mc = a.sc / a.n, mr = a.sr / a.n;
    const double vcc = a.scc / a.n - mc * mc, vrr = a.srr / a.n - mr * mr, vcr = a.scr / a.n - mc * mr;
    const double half = 0.5 * (vcc + vrr);
    const double disc = std::sqrt(std::max(0.0, 0.25 * (vcc - vrr) * (vcc - vrr) + vcr * vcr));
    const double l1 = half + disc, l2 = std::max(0.0, half - disc);
    const double ecc = l1 > 1e-12 ? std::sqrt(std::max(0.0, 1.0 - l2 / l1)) : 0.0;

    out.rows.push_back({row->track_id, frame, "area", a.area, "um^2"});
    out.rows.push_back({row->track_id, frame, "eccentricity", ecc, "dimensionless"});
    if (frame > 0 && frame_interval) {
      if (const auto* prev = tracks.find(row->track_id, frame - 1)) {
        const auto& p = prev->centroid;
        const auto& q = row->centroid;
        const double d = std::hypot(q[0] - p[0], q[1] - p[1], q[2] - p[2]);
        out.rows.push_back({row->track_id, frame, "speed", d / *frame_interval, "um/s"});
      }
    }
  }
  out.sort();
  return out;
}

FeatureTable cell_volume(const LabelVolume& labels, const TrackTable& tracks, std::size_t frame) {
  std::unordered_map<std::uint32_t, std::size_t> counts;
  for (const auto l : labels.data)
    if (l) ++counts[l];
  const auto& s = labels.meta.spacing;
  const double voxel = s.x * s.y * s.z;
  FeatureTable out;
  for (const auto* row : tracks.frame_rows(frame)) {
    auto it = counts.find(row->label);
    if (it == counts.end()) continue;
    out.rows.push_back({row->track_id, frame, "volume", static_cast<double>(it->second) * voxel, "um^3"});
  }
  out.sort();
  return out;
}

LabelVolume extract_apical_patches(const LabelVolume& labels, const QuantifyParams& params) {
  params.validate();
  LabelVolume out(labels.meta, 0);
  std::vector<std::uint8_t> fg(labels.data.size());
  bool any = false;
  for (std::size_t i = 0; i < fg.size(); ++i) {
    fg[i] = labels.data[i] != 0;
    any = any || fg[i];
  }
  if (!any) return out;
  // A voxel survives erosion by the ball of radius r exactly when its nearest
  // background voxel (outside the grid included) lies further than r.
  const auto d2 = squared_distance_to_zero(fg, labels.dims(), EdmBoundary{});
  const double r2 = static_cast<double>(params.shell_radius) * params.shell_radius;
  for (std::size_t i = 0; i < fg.size(); ++i)
    if (fg[i] && !(d2[i] > r2)) out.data[i] = labels.data[i];
  return out;
}

double apical_area(const Points& patch, double plane_cell) {
  if (!(plane_cell > 0)) throw InvalidArgument(kModule, "plane cell size must be positive");
  if (patch.size() < 3) throw ComputeError(kModule, "undefined area: patch has fewer than 3 voxels");
  const auto pa = principal_axes(patch);
  if (!has_plane(pa)) throw ComputeError(kModule, "undefined area: patch voxels are collinear");
  std::vector<std::array<double, 2>> uv;
  uv.reserve(patch.size());
  double umin = std::numeric_limits<double>::infinity(), vmin = umin;
  for (const auto& p : patch) {
    const std::array<double, 3> d{p[0] - pa.mean[0], p[1] - pa.mean[1], p[2] - pa.mean[2]};
    const double u = dot(d, pa.axes[0]), v = dot(d, pa.axes[1]);
    uv.push_back({u, v});
    umin = std::min(umin, u);
    vmin = std::min(vmin, v);
  }
  // The grid is anchored so the extreme points sit at cell centres; points on
  // a lattice of the cell size then never straddle a cell edge.
  std::set<std::pair<long long, long long>> cells;
  for (const auto& [u, v] : uv)
    cells.insert({static_cast<long long>(std::floor((u - umin) / plane_cell + 0.5)),
                  static_cast<long long>(std::floor((v - vmin) / plane_cell + 0.5))});
  return static_cast<double>(cells.size()) * plane_cell * plane_cell;
}

double apical_basal_length(const Points& cell, const Points& patch, const Spacing& spacing) {
  if (cell.empty() || patch.empty()) throw ComputeError(kModule, "apical-basal length needs a nonempty apical patch");
  if (patch.size() < 3) throw ComputeError(kModule, "degenerate patch normal: fewer than 3 voxels");
  const auto pa = principal_axes(patch);
  if (!has_plane(pa)) throw ComputeError(kModule, "degenerate patch normal: patch voxels are collinear");
  const auto& n = pa.axes[2];
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& p : cell) {
    const double t = dot(p, n);
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  const double voxel_extent = std::abs(n[0]) * spacing.x + std::abs(n[1]) * spacing.y + std::abs(n[2]) * spacing.z;
  return hi - lo + voxel_extent;
}

FeatureTable quantify_3d(const LabelVolume& labels, const TrackTable& tracks, std::size_t frame,
                         const QuantifyParams& params, const std::vector<std::string>& features) {
  params.validate();
  bool want_volume = false, want_area = false, want_length = false;
  for (const auto& f : features) {
    if (f == "volume") want_volume = true;
    else if (f == "apical_area") want_area = true;
    else if (f == "ab_length") want_length = true;
    else throw InvalidArgument(kModule, "unknown 3D feature '" + f + "'");
  }

  FeatureTable out;
  if (want_volume) out.append(cell_volume(labels, tracks, frame));
  if (want_area || want_length) {
    const auto rows = tracks.frame_rows(frame);
    std::unordered_map<std::uint32_t, std::size_t> slot;
    for (std::size_t k = 0; k < rows.size(); ++k) slot[rows[k]->label] = k;
    std::vector<Points> cells(rows.size()), patches(rows.size());
    const auto patch_labels = extract_apical_patches(labels, params);
    const auto& s = labels.meta.spacing;
    for (std::size_t i = 0; i < labels.data.size(); ++i) {
      const auto l = labels.data[i];
      if (!l) continue;
      auto it = slot.find(l);
      if (it == slot.end()) continue;
      const auto [x, y, z] = labels.coords(i);
      const std::array<double, 3> p{static_cast<double>(x) * s.x, static_cast<double>(y) * s.y,
                                    static_cast<double>(z) * s.z};
      if (want_length) cells[it->second].push_back(p);
      if (patch_labels.data[i]) patches[it->second].push_back(p);
    }
    const double cell_size = params.plane_cell.value_or(s.x);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const auto& patch = patches[k];
      if (patch.size() < 3) continue;
      if (!has_plane(principal_axes(patch))) continue;
      if (want_area) out.rows.push_back({rows[k]->track_id, frame, "apical_area", apical_area(patch, cell_size), "um^2"});
      if (want_length)
        out.rows.push_back({rows[k]->track_id, frame, "ab_length", apical_basal_length(cells[k], patch, s), "um"});
    }
  }
  out.sort();
  return out;
}

}  // namespace cellpeel
