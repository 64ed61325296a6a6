#include "cellpeel/peel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <tuple>

#include "cellpeel/shells.hpp"

namespace cellpeel {

namespace {

constexpr const char* kModule = "peel";

// Directions in clockwise screen order (z grows downwards).
constexpr std::array<RingPoint, 8> kDirs{{{1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}}};
constexpr int kWest = 4;
// Straight on, then alternately counterclockwise and clockwise, reversal last.
constexpr std::array<int, 8> kTurnOrder{0, -1, 1, -2, 2, -3, 3, 4};

std::string where(std::size_t slice) { return " (slice y=" + std::to_string(slice) + ")"; }

double step_between(const RingPoint& a, const RingPoint& b) {
  return (a[0] != b[0] && a[1] != b[1]) ? std::sqrt(2.0) : 1.0;
}

bool fg(const Mask2D& m, long x, long z) { return m.in_bounds(x, z) && m.at(x, z); }

// Yokoi connectivity number for 8-connected foreground; 1 means deleting the
// pixel preserves topology.
bool is_simple(const Mask2D& m, long x, long z) {
  // E, NE, N, NW, W, SW, S, SE
  static constexpr int dx[8] = {1, 1, 0, -1, -1, -1, 0, 1};
  static constexpr int dz[8] = {0, -1, -1, -1, 0, 1, 1, 1};
  int nb[9];
  for (int k = 0; k < 8; ++k) nb[k] = fg(m, x + dx[k], z + dz[k]) ? 0 : 1;  // complement
  nb[8] = nb[0];
  int c = 0;
  for (int k = 0; k < 8; k += 2) c += nb[k] - nb[k] * nb[k + 1] * nb[(k + 2) % 8];
  return c == 1;
}

}  // namespace

double RingTrace::perimeter() const { return std::accumulate(step_len.begin(), step_len.end(), 0.0); }

double signed_area(const std::vector<RingPoint>& pts) {
  double a = 0;
  for (std::size_t i = 0, n = pts.size(); i < n; ++i) {
    const auto& p = pts[i];
    const auto& q = pts[(i + 1) % n];
    a += static_cast<double>(p[0]) * q[1] - static_cast<double>(q[0]) * p[1];
  }
  return 0.5 * a;
}

RingTrace trace_slice_ring(const Mask2D& slice, RingPoint start, std::size_t slice_index) {
  if (!fg(slice, start[0], start[1]))
    throw InvalidArgument(kModule, "trace start is not a shell pixel" + where(slice_index));
  const auto total = static_cast<std::size_t>(std::count(slice.data.begin(), slice.data.end(), 1));

  std::vector<std::uint8_t> visited(slice.size(), 0);
  RingTrace trace;
  trace.slice_index = slice_index;
  trace.points.push_back(start);
  visited[start[0] + slice.width * start[1]] = 1;
  int dir = kWest;
  for (;;) {
    const auto cur = trace.points.back();
    bool moved = false;
    for (int turn : kTurnOrder) {
      const int d = (dir + turn + 8) % 8;
      const long nx = cur[0] + kDirs[d][0], nz = cur[1] + kDirs[d][1];
      if (!fg(slice, nx, nz)) continue;
      const std::size_t idx = static_cast<std::size_t>(nx) + slice.width * static_cast<std::size_t>(nz);
      if (visited[idx]) continue;
      visited[idx] = 1;
      trace.points.push_back({static_cast<int>(nx), static_cast<int>(nz)});
      dir = d;
      moved = true;
      break;
    }
    if (!moved) break;
  }

  const auto& last = trace.points.back();
  const bool closes = trace.points.size() >= 3 && std::abs(last[0] - start[0]) <= 1 && std::abs(last[1] - start[1]) <= 1;
  if (!closes)
    throw ComputeError(kModule, "ring is broken: walk dead-ends after " + std::to_string(trace.points.size()) +
                                    " pixel(s) without returning to the start" + where(slice_index));
  if (trace.points.size() < total)
    throw ComputeError(kModule, "ring tracing left " + std::to_string(total - trace.points.size()) +
                                    " orphan pixel(s)" + where(slice_index));

  if (signed_area(trace.points) > 0) std::reverse(trace.points.begin() + 1, trace.points.end());

  const std::size_t n = trace.points.size();
  trace.step_len.resize(n);
  for (std::size_t i = 0; i < n; ++i) trace.step_len[i] = step_between(trace.points[(i + n - 1) % n], trace.points[i]);
  return trace;
}

Mask2D thin_ring(const Mask2D& band, const Image2D<double>* priority) {
  Mask2D out = band;
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < band.size(); ++i)
    if (band.data[i]) order.push_back(i);
  if (priority)
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return priority->data[a] > priority->data[b]; });

  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t i : order) {
      if (!out.data[i]) continue;
      const long x = static_cast<long>(i % band.width), z = static_cast<long>(i / band.width);
      if (is_simple(out, x, z)) {
        out.data[i] = 0;
        changed = true;
      }
    }
  }
  return out;
}

MaskVolume thin_shell(const MaskVolume& shell, const DistanceVolume* edm, double t) {
  if (edm && !(edm->dims() == shell.dims())) throw InvalidArgument(kModule, "distance map and shell dimensions differ");
  MaskVolume out(shell.meta, 0);
  const auto& d = shell.dims();
  for (std::size_t y = 0; y < d.ny; ++y) {
    const auto slice = xz_slice(shell, y);
    if (std::none_of(slice.data.begin(), slice.data.end(), [](std::uint8_t v) { return v != 0; })) continue;
    if (edm) {
      auto pr = xz_slice(*edm, y);
      for (auto& v : pr.data) v = std::abs(v - t);
      set_xz_slice(out, y, thin_ring(slice, &pr));
    } else {
      set_xz_slice(out, y, thin_ring(slice));
    }
  }
  return out;
}

PeelImage::PeelImage(std::size_t w, std::size_t h)
    : width(w),
      height(h),
      intensity(w * h, 0.0),
      metric(w * h, 0.0),
      valid(w * h, 0),
      row_length(h, 0),
      source(w * h, {-1, -1, -1}) {}

Mask2D PeelImage::used_region() const {
  Mask2D m(width, height, 0);
  for (std::size_t r = 0; r < height; ++r)
    for (std::size_t c = 0; c < row_length[r] && c < width; ++c) m.at(c, r) = 1;
  return m;
}

PeelImage project_peel(const MaskVolume& shell, const IntensityVolume& raw) {
  if (!(shell.dims() == raw.dims())) throw InvalidArgument(kModule, "shell and raw image dimensions differ");
  const auto& sp = raw.meta.spacing;
  if (std::abs(sp.x - sp.z) > 1e-6 * std::max(sp.x, sp.z))
    throw InvalidArgument(kModule, "raw image must be resampled to isotropic cross-sections (sx == sz)");
  const auto& d = shell.dims();

  std::size_t y0 = d.ny, y1 = 0;
  for (std::size_t i = 0; i < shell.data.size(); ++i)
    if (shell.data[i]) {
      const std::size_t y = (i / d.nx) % d.ny;
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  if (y0 > y1) throw InvalidArgument(kModule, "shell is empty");

  std::vector<RingTrace> traces;
  RingPoint start{0, 0};
  for (std::size_t y = y0; y <= y1; ++y) {
    const auto slice = xz_slice(shell, y);
    const auto rings = connected_components(slice, 8);
    const std::uint32_t ring_count = rings.data.empty() ? 0 : *std::max_element(rings.data.begin(), rings.data.end());
    if (ring_count == 0) throw ComputeError(kModule, "empty slice inside the shell's extent" + where(y));
    if (ring_count > 1)
      throw ComputeError(kModule, std::to_string(ring_count) + " separate rings in one slice" + where(y));

    if (y == y0) {
      // Scan order is z-major, so the first hit is the dorsal-most pixel.
      const auto it = std::find(slice.data.begin(), slice.data.end(), 1);
      const auto i = static_cast<std::size_t>(it - slice.data.begin());
      start = {static_cast<int>(i % d.nx), static_cast<int>(i / d.nx)};
    } else {
      std::tuple<long, int, int> best{-1, 0, 0};
      for (std::size_t z = 0; z < d.nz; ++z)
        for (std::size_t x = 0; x < d.nx; ++x) {
          if (!slice.at(x, z)) continue;
          const long dx = static_cast<long>(x) - start[0], dz = static_cast<long>(z) - start[1];
          const std::tuple<long, int, int> cand{dx * dx + dz * dz, static_cast<int>(x), static_cast<int>(z)};
          if (std::get<0>(best) < 0 || cand < best) best = cand;
        }
      start = {std::get<1>(best), std::get<2>(best)};
    }
    traces.push_back(trace_slice_ring(slice, start, y));
  }

  std::size_t width = 0;
  for (const auto& t : traces) width = std::max(width, t.points.size());
  PeelImage peel(width, traces.size());
  peel.first_slice = y0;
  peel.spacing = sp;
  for (std::size_t r = 0; r < traces.size(); ++r) {
    const auto& t = traces[r];
    peel.row_length[r] = t.points.size();
    for (std::size_t c = 0; c < t.points.size(); ++c) {
      const auto [x, z] = t.points[c];
      const std::size_t i = peel.index(c, r);
      peel.intensity[i] = raw.at(x, t.slice_index, z);
      peel.metric[i] = t.step_len[c];
      peel.valid[i] = 1;
      peel.source[i] = {x, static_cast<int>(t.slice_index), z};
    }
  }
  return peel;
}

PeelImage fill_holes(const PeelImage& peel) {
  PeelImage out = peel;
  const auto region = peel.used_region();
  const std::size_t w = peel.width, h = peel.height;
  std::vector<std::size_t> holes;
  for (std::size_t i = 0; i < region.size(); ++i)
    if (region.data[i] && !peel.valid[i]) holes.push_back(i);
  if (holes.empty()) return out;

  auto neighbours = [&](std::size_t i, auto&& fn) {
    const std::size_t c = i % w, r = i / w;
    if (c > 0) fn(i - 1);
    if (c + 1 < w) fn(i + 1);
    if (r > 0) fn(i - w);
    if (r + 1 < h) fn(i + w);
  };

  // Seed holes layer by layer outwards from valid pixels; unreachable holes stay unset.
  std::vector<std::uint8_t> known(peel.valid.begin(), peel.valid.end());
  for (std::size_t i = 0; i < known.size(); ++i) known[i] = known[i] && region.data[i];
  std::vector<std::size_t> reachable;
  for (std::vector<std::size_t> layer = holes; !layer.empty();) {
    std::vector<std::pair<std::size_t, std::array<double, 2>>> ready;
    std::vector<std::size_t> rest;
    for (std::size_t i : layer) {
      double si = 0, sm = 0;
      int n = 0;
      neighbours(i, [&](std::size_t j) {
        if (!known[j]) return;
        si += out.intensity[j];
        sm += out.metric[j];
        ++n;
      });
      if (n) ready.push_back({i, {si / n, sm / n}});
      else rest.push_back(i);
    }
    if (ready.empty()) break;
    for (const auto& [i, v] : ready) {
      out.intensity[i] = v[0];
      out.metric[i] = v[1];
      known[i] = 1;
      reachable.push_back(i);
    }
    layer = std::move(rest);
  }
  std::sort(reachable.begin(), reachable.end());

  // Gauss-Seidel relaxation: each hole becomes the mean of its in-region neighbours.
  for (int iter = 0; iter < 100000; ++iter) {
    double change = 0;
    for (std::size_t i : reachable) {
      double si = 0, sm = 0;
      int n = 0;
      neighbours(i, [&](std::size_t j) {
        if (!region.data[j] || !known[j]) return;
        si += out.intensity[j];
        sm += out.metric[j];
        ++n;
      });
      const double ni = si / n, nm = sm / n;
      change = std::max({change, std::abs(ni - out.intensity[i]), std::abs(nm - out.metric[i])});
      out.intensity[i] = ni;
      out.metric[i] = nm;
    }
    if (change < 1e-12) break;
  }
  return out;
}

double measure_length(const RingTrace& trace, std::size_t i0, std::size_t i1, double lateral_spacing) {
  if (i0 > i1 || i1 >= trace.step_len.size())
    throw InvalidArgument(kModule, "length range [" + std::to_string(i0) + ", " + std::to_string(i1) +
                                       "] outside a ring of " + std::to_string(trace.step_len.size()) + " points");
  double len = 0;
  for (std::size_t i = i0 + 1; i <= i1; ++i) len += trace.step_len[i];
  return len * lateral_spacing;
}

void FurrowLine::validate() const {
  if (points.size() < 2) throw InvalidArgument(kModule, "furrow line needs at least 2 click points");
  for (std::size_t i = 1; i < points.size(); ++i)
    if (points[i][0] < points[i - 1][0]) throw InvalidArgument(kModule, "furrow click rows must be non-decreasing");
}

double FurrowLine::column_at(double row) const {
  if (row <= points.front()[0]) return points.front()[1];
  if (row >= points.back()[0]) return points.back()[1];
  for (std::size_t k = 0; k + 1 < points.size(); ++k) {
    const auto& a = points[k];
    const auto& b = points[k + 1];
    if (row >= a[0] && row <= b[0] && b[0] > a[0]) return a[1] + (row - a[0]) * (b[1] - a[1]) / (b[0] - a[0]);
  }
  return points.back()[1];
}

PeelImage rectify(const PeelImage& peel, const FurrowLine& furrow) {
  furrow.validate();
  for (const auto& [row, col] : furrow.points) {
    if (row < 0 || row > static_cast<double>(peel.height) - 1)
      throw InvalidArgument(kModule, "furrow click row " + std::to_string(row) + " outside the peel");
    const auto r = static_cast<std::size_t>(std::lround(row));
    if (col < 0 || col >= static_cast<double>(peel.row_length[r]))
      throw InvalidArgument(kModule, "furrow click column " + std::to_string(col) + " outside row " +
                                         std::to_string(r) + "'s ring");
  }
  PeelImage out = peel;
  const bool has_source = peel.source.size() == peel.intensity.size();
  for (std::size_t r = 0; r < peel.height; ++r) {
    const auto len = static_cast<long>(peel.row_length[r]);
    if (len == 0) continue;
    const double c = furrow.column_at(static_cast<double>(r));
    const auto shift = static_cast<long>(std::floor(static_cast<double>(len) / 2.0 - c + 0.5));
    for (long col = 0; col < len; ++col) {
      const long dst = ((col + shift) % len + len) % len;
      const std::size_t from = peel.index(static_cast<std::size_t>(col), r);
      const std::size_t to = peel.index(static_cast<std::size_t>(dst), r);
      out.intensity[to] = peel.intensity[from];
      out.metric[to] = peel.metric[from];
      out.valid[to] = peel.valid[from];
      if (has_source) out.source[to] = peel.source[from];
    }
  }
  return out;
}

}  // namespace cellpeel
