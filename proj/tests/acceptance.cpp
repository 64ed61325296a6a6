// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cellpeel/cli.hpp"
#include "cellpeel/masking.hpp"
#include "cellpeel/peel.hpp"
#include "cellpeel/phantom.hpp"
#include "cellpeel/quantify.hpp"
#include "cellpeel/segment2d.hpp"
#include "cellpeel/shells.hpp"
#include "cellpeel/tracking.hpp"
#include "test_support.hpp"

using namespace cellpeel;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome edm_exactness() {
  std::mt19937 rng(20240611);
  double max_err = 0, edm_time = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t nx = 1 + rng() % 20, ny = 1 + rng() % 20, nz = 1 + rng() % 20;
    const double density = std::uniform_real_distribution<double>(0.3, 0.97)(rng);
    MaskVolume m(VolumeMeta{{nx, ny, nz}, {}, std::nullopt}, 0);
    for (auto& v : m.data) v = std::uniform_real_distribution<double>(0, 1)(rng) < density;
    m.data[rng() % m.data.size()] = 1;

    const auto t0 = Clock::now();
    const auto edm = euclidean_distance_map(m);
    edm_time += seconds_since(t0);

    // Background sites: in-grid zeros plus the one-voxel layer around the grid.
    std::vector<std::array<long, 3>> bg;
    for (long z = -1; z <= static_cast<long>(nz); ++z)
      for (long y = -1; y <= static_cast<long>(ny); ++y)
        for (long x = -1; x <= static_cast<long>(nx); ++x)
          if (!m.in_bounds(x, y, z) || !m.at(x, y, z)) bg.push_back({x, y, z});
    for (std::size_t z = 0; z < nz; ++z)
      for (std::size_t y = 0; y < ny; ++y)
        for (std::size_t x = 0; x < nx; ++x) {
          double best = 0;
          if (m.at(x, y, z)) {
            best = 1e300;
            for (const auto& b : bg) {
              const double dx = double(x) - b[0], dy = double(y) - b[1], dz = double(z) - b[2];
              best = std::min(best, dx * dx + dy * dy + dz * dz);
            }
            best = std::sqrt(best);
          }
          max_err = std::max(max_err, std::abs(best - edm.at(x, y, z)));
        }
  }
  Outcome o;
  o.pass = max_err <= 1e-9 && edm_time < 10.0;
  o.detail = "max |err| = " + fmt("%.3g", max_err) + ", transform time " + fmt("%.3f", edm_time) + " s";
  return o;
}

// ---------------------------------------------------------------------------

Outcome shell_geometry() {
  CylinderPhantom p;
  p.r_out = 30;
  p.r_in = 15;
  p.height = 64;
  const auto mask = cylinder_mask(p);
  const auto shells = shells_from_mask(mask, ShellParams{5.0, 0.5, 26});
  const auto& d = mask.dims();
  const double cx = (double(d.nx) - 1) / 2, cz = (double(d.nz) - 1) / 2;
  double sum = 0;
  std::size_t apical = 0, basal = 0;
  for (std::size_t i = 0; i < mask.data.size(); ++i) {
    const auto [x, y, z] = mask.coords(i);
    if (shells.apical.data[i]) {
      ++apical;
      sum += std::hypot(double(x) - cx, double(z) - cz);
    }
    basal += shells.basal.data[i];
  }
  const double mean_r = apical ? sum / double(apical) : 0;
  Outcome o;
  o.pass = shells.diagnostics.component_count == 2 && std::abs(mean_r - 25.0) <= 0.6 && apical > basal;
  o.detail = std::to_string(shells.diagnostics.component_count) + " components, mean apical radius " +
             fmt("%.3f", mean_r) + ", apical " + std::to_string(apical) + " > basal " + std::to_string(basal);
  return o;
}

// ---------------------------------------------------------------------------

struct PeelCheck {
  bool counts_equal = true;
  double min_ratio = 1e9, max_ratio = 0;
  double mean_radius = 0;
};

// Length ratios are taken against the measured mean radius of the traced shell.
PeelCheck peel_cylinder(const CylinderPhantom& p, bool check_length) {
  const auto mask = cylinder_mask(p);
  auto shells = shells_from_mask(mask, ShellParams{5.0, 0.5, 26});
  const auto thin = thin_shell(shells.apical, &shells.distance, 5.0);
  IntensityVolume raw(mask.meta, 16, 0);
  for (std::size_t i = 0; i < raw.data.size(); ++i) raw.data[i] = static_cast<std::uint16_t>(i % 4096);
  const auto peel = project_peel(thin, raw);
  PeelCheck c;
  const double cx = (double(mask.dims().nx) - 1) / 2, cz = (double(mask.dims().nz) - 1) / 2;
  std::size_t n = 0;
  for (std::size_t i = 0; i < thin.data.size(); ++i)
    if (thin.data[i]) {
      const auto [x, y, z] = thin.coords(i);
      c.mean_radius += std::hypot(double(x) - cx, double(z) - cz);
      ++n;
    }
  if (n) c.mean_radius /= double(n);
  for (std::size_t r = 0; r < peel.height; ++r) {
    const std::size_t y = peel.first_slice + r;
    std::size_t shell_pixels = 0;
    for (std::size_t z = 0; z < mask.dims().nz; ++z)
      for (std::size_t x = 0; x < mask.dims().nx; ++x) shell_pixels += thin.at(x, y, z);
    std::size_t row_pixels = 0;
    double len = 0;
    for (std::size_t col = 0; col < peel.width; ++col)
      if (peel.valid[peel.index(col, r)]) {
        ++row_pixels;
        len += peel.metric[peel.index(col, r)];
      }
    if (row_pixels != shell_pixels || peel.row_length[r] != shell_pixels) c.counts_equal = false;
    if (check_length) {
      const double ratio = len / (2 * kPi * c.mean_radius);
      c.min_ratio = std::min(c.min_ratio, ratio);
      c.max_ratio = std::max(c.max_ratio, ratio);
    }
  }
  return c;
}

Outcome peel_conservation() {
  Outcome o;
  std::ostringstream detail;
  for (double R : {10.0, 20.0, 40.0}) {
    CylinderPhantom p;
    p.r_out = R + 5;
    p.r_in = std::max(R - 10, 1.0);
    p.height = 24;
    const auto c = peel_cylinder(p, true);
    const bool ok = c.counts_equal && c.min_ratio >= 0.95 && c.max_ratio <= 1.08;
    o.pass = o.pass && ok;
    detail << "R=" << R << ": R_shell " << fmt("%.2f", c.mean_radius) << ", counts " << (c.counts_equal ? "equal" : "DIFFER") << ", length/(2 pi R_shell) in ["
           << fmt("%.4f", c.min_ratio) << ", " << fmt("%.4f", c.max_ratio) << "]; ";
  }
  CylinderPhantom g;
  g.r_out = 30;
  g.r_in = 15;
  g.height = 24;
  g.groove_depth = 8;
  g.groove_half_width = 0.6;
  const auto c = peel_cylinder(g, false);
  o.pass = o.pass && c.counts_equal;
  detail << "V-groove: counts " << (c.counts_equal ? "equal" : "DIFFER");
  o.detail = detail.str();
  return o;
}

// ---------------------------------------------------------------------------

SliceAnnotation circle_annotation(std::size_t y, double cx, double cz, double r, std::size_t n = 180) {
  SliceAnnotation a;
  a.slice_index = y;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = 2 * kPi * double(k) / double(n);
    a.outer.push_back({cx + r * std::cos(t), cz + r * std::sin(t)});
  }
  return a;
}

Outcome mask_interpolation() {
  AnnotationSet set;
  set.dims = {61, 21, 61};
  const double c = 30, r0 = 10, r1 = 22;
  set.slices = {circle_annotation(0, c, c, r0), circle_annotation(20, c, c, r1)};
  const auto mask = interpolate_masks(set);

  bool exact = true;
  for (const auto& s : set.slices) {
    const auto expect = rasterize_annotation(s, set.dims.nx, set.dims.nz);
    for (std::size_t z = 0; z < set.dims.nz; ++z)
      for (std::size_t x = 0; x < set.dims.nx; ++x)
        if (mask.at(x, s.slice_index, z) != expect.at(x, z)) exact = false;
  }
  // Between the slices every pixel well inside the predicted circle must be
  // set and every pixel well outside must be clear.
  double worst = 0;
  for (std::size_t y = 1; y < 20; ++y) {
    const double predicted = r0 + (r1 - r0) * double(y) / 20.0;
    for (std::size_t z = 0; z < set.dims.nz; ++z)
      for (std::size_t x = 0; x < set.dims.nx; ++x) {
        const double rho = std::hypot(double(x) - c, double(z) - c);
        const bool in = mask.at(x, y, z);
        if (in && rho > predicted) worst = std::max(worst, rho - predicted);
        if (!in && rho < predicted) worst = std::max(worst, predicted - rho);
      }
  }
  Outcome o;
  o.pass = exact && worst <= 1.0;
  o.detail = std::string("annotated slices ") + (exact ? "exact" : "DIFFER") +
             ", worst radial deviation from linear prediction " + fmt("%.3f", worst) + " px";
  return o;
}

// ---------------------------------------------------------------------------

// Reference flooding for distinct values: visiting pixels in ascending
// order, a pixel takes the label of its lowest already-labelled 4-neighbour.
LabelImage steepest_descent(const Image2D<double>& img, const SeedSet& seeds) {
  LabelImage out(img.width, img.height, 0);
  for (const auto& s : seeds.seeds) out.at(s.col, s.row) = s.label;
  std::vector<std::size_t> order(img.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return img.data[a] < img.data[b]; });
  for (auto i : order) {
    if (out.data[i]) continue;
    const long c = long(i % img.width), r = long(i / img.width);
    double best = 1e300;
    std::uint32_t label = 0;
    const long nb[4][2] = {{c - 1, r}, {c + 1, r}, {c, r - 1}, {c, r + 1}};
    for (const auto& n : nb) {
      if (!img.in_bounds(n[0], n[1])) continue;
      const auto j = std::size_t(n[0]) + img.width * std::size_t(n[1]);
      if (out.data[j] && img.data[j] < best) {
        best = img.data[j];
        label = out.data[j];
      }
    }
    out.data[i] = label;
  }
  return out;
}

Outcome watershed_correctness() {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> uni(0, 20);
  int matches = 0;
  bool partition = true, monotone = true;
  for (int trial = 0; trial < 20; ++trial) {
    Image2D<double> img(32, 32);
    std::set<double> used;
    for (auto& v : img.data) {
      do v = uni(rng);
      while (!used.insert(v).second);
    }
    SegParams p;
    p.h = 0;
    const auto seeds = h_minima_seeds(img, p);
    const auto labels = seeded_watershed(img, seeds, p);
    if (labels.data == steepest_descent(img, seeds).data) ++matches;

    std::size_t prev = SIZE_MAX;
    for (double h : {0.0, 1.0, 2.0, 4.0, 8.0}) {
      p.h = h;
      const auto s = h_minima_seeds(img, p);
      const auto l = seeded_watershed(img, s, p);
      std::set<std::uint32_t> seed_labels, seen;
      for (const auto& sd : s.seeds) seed_labels.insert(sd.label);
      for (auto v : l.data) {
        if (v == 0) partition = false;
        seen.insert(v);
      }
      if (seen != seed_labels) partition = false;
      if (s.seeds.size() > prev) monotone = false;
      prev = s.seeds.size();
    }
  }
  Outcome o;
  o.pass = matches == 20 && partition && monotone;
  o.detail = std::to_string(matches) + "/20 match the flooding reference, partition " + (partition ? "ok" : "BROKEN") +
             ", seed counts " + (monotone ? "non-increasing" : "NOT monotone") + " in h";
  return o;
}

// ---------------------------------------------------------------------------

Outcome tracking() {
  const Dims d{64, 48, 40};
  auto frames = translated_boxes(d, 16, 1, 5, 10, 0);
  for (auto& f : frames) f.meta.frame_interval = 40.0;

  // Reference: objects that never touch a face, found by scanning the faces.
  std::set<std::uint32_t> all, touching;
  for (const auto& f : frames)
    for (std::size_t z = 0; z < d.nz; ++z)
      for (std::size_t y = 0; y < d.ny; ++y)
        for (std::size_t x = 0; x < d.nx; ++x) {
          const auto l = f.at(x, y, z);
          if (!l) continue;
          all.insert(l);
          if (x == 0 || y == 0 || z == 0 || x == d.nx - 1 || y == d.ny - 1 || z == d.nz - 1) touching.insert(l);
        }
  std::set<std::uint32_t> interior;
  for (auto l : all)
    if (!touching.count(l)) interior.insert(l);

  const auto table = track_3d_overlap(frames);
  std::size_t kept_ids = 0;
  for (auto l : interior) {
    bool ok = true;
    for (std::size_t f = 0; f < frames.size(); ++f) {
      const TrackRow* row = nullptr;
      for (const auto& r : table.rows)
        if (r.frame == f && r.label == l) row = &r;
      if (!row || row->track_id != l) ok = false;
    }
    kept_ids += ok;
  }
  std::vector<std::set<std::uint32_t>> boundary;
  for (const auto& f : frames) boundary.push_back(boundary_labels(f));
  const auto filtered = filter_complete_tracks(table, frames.size(), boundary);
  std::set<std::uint32_t> retained;
  for (const auto& r : filtered.rows)
    if (r.status != TrackStatus::Discarded) retained.insert(r.track_id);

  Outcome o;
  o.pass = !interior.empty() && kept_ids == interior.size() && retained == interior;
  o.detail = std::to_string(kept_ids) + "/" + std::to_string(interior.size()) +
             " interior objects keep their IDs over 16 frames; filter retains " + std::to_string(retained.size()) +
             " tracks, " + (retained == interior ? "exactly the interior set" : "NOT the interior set") + " (" +
             std::to_string(all.size()) + " objects)";
  return o;
}

// ---------------------------------------------------------------------------

Outcome quantification() {
  std::ostringstream detail;
  bool pass = true;

  {  // digital sphere volume
    const auto sphere = digital_sphere(15.0);
    LabelVolume labels(sphere.meta, 0);
    for (std::size_t i = 0; i < sphere.data.size(); ++i) labels.data[i] = sphere.data[i];
    TrackTable t;
    t.rows.push_back({1, 0, 1, {}, TrackStatus::Active});
    const auto f = cell_volume(labels, t, 0);
    const double expect = 4.0 / 3.0 * kPi * 15 * 15 * 15;
    const double v = f.rows.empty() ? 0 : f.rows[0].value;
    const double rel = std::abs(v - expect) / expect;
    pass = pass && rel <= 0.05;
    detail << "sphere volume " << fmt("%.1f", v) << " (" << fmt("%.2f", 100 * rel) << "% off); ";
  }
  {  // 10 x 10 patch tilted 45 degrees about x, digitized as a standard plane
    std::vector<std::array<double, 3>> patch;
    for (int x = 0; x < 10; ++x)
      for (int k = 0; k <= 13; ++k) {
        const int z = k / 2, y = k - z;  // y + z = k, z - y in {-1, 0}
        patch.push_back({double(x), double(y), double(z)});
      }
    const double a = apical_area(patch, 1.0);
    const double rel = std::abs(a - 100.0) / 100.0;
    pass = pass && rel <= 0.05;
    detail << "tilted patch area " << fmt("%.1f", a) << " um^2; ";
  }
  {  // 4 x 4 x 20 column, patch = one end face
    std::vector<std::array<double, 3>> cell, patch;
    for (int z = 0; z < 20; ++z)
      for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
          cell.push_back({double(x), double(y), double(z)});
          if (z == 0) patch.push_back({double(x), double(y), double(z)});
        }
    const double len = apical_basal_length(cell, patch, Spacing{});
    pass = pass && std::abs(len - 20.0) <= 1.0;
    detail << "column length " << fmt("%.3f", len) << " um; ";
  }
  {  // 1000 voxels at 0.19 x 0.19 x 0.5 um
    LabelVolume labels(VolumeMeta{{10, 10, 10}, {0.19, 0.19, 0.5}, std::nullopt}, 1);
    TrackTable t;
    t.rows.push_back({1, 0, 1, {}, TrackStatus::Active});
    const auto f = cell_volume(labels, t, 0);
    const double v = f.rows.empty() ? 0 : f.rows[0].value;
    pass = pass && std::abs(v - 18.05) <= 1e-9;
    detail << "cube volume " << fmt("%.10g", v) << " um^3";
  }
  return {pass, detail.str()};
}

// ---------------------------------------------------------------------------

Outcome rectification() {
  CylinderPhantom p;
  p.height = 32;
  const auto mask = cylinder_mask(p);
  auto shells = shells_from_mask(mask, ShellParams{});
  const auto thin = thin_shell(shells.apical, &shells.distance, 5.0);
  const auto raw = cylinder_raw(p, 0);
  const auto peel = project_peel(thin, raw);

  const double c0 = 7.0;
  FurrowLine furrow;
  furrow.points = {{0.0, c0}, {double(peel.height - 1), c0}};
  const auto rect = rectify(peel, furrow);

  bool centred = true, multisets = true;
  double worst = 0;
  for (std::size_t r = 0; r < peel.height; ++r) {
    const std::size_t L = peel.row_length[r];
    const auto target = peel.source[peel.index(std::size_t(c0), r)];
    long found = -1;
    for (std::size_t c = 0; c < L; ++c)
      if (rect.source[rect.index(c, r)] == target) found = long(c);
    const double off = found < 0 ? 1e9 : std::abs(double(found) - double(L) / 2.0);
    worst = std::max(worst, off);
    if (off > 1.0) centred = false;
    std::vector<double> a(peel.intensity.begin() + peel.index(0, r), peel.intensity.begin() + peel.index(0, r) + L);
    std::vector<double> b(rect.intensity.begin() + rect.index(0, r), rect.intensity.begin() + rect.index(0, r) + L);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b) multisets = false;
  }
  Outcome o;
  o.pass = centred && multisets;
  o.detail = "furrow within " + fmt("%.1f", worst) + " px of L/2 on all " + std::to_string(peel.height) +
             " rows, row multisets " + (multisets ? "preserved" : "CHANGED");
  return o;
}

// ---------------------------------------------------------------------------

int cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int rc = run_subcommand(args, out, err);
  if (rc != 0) std::fprintf(stderr, "cellpeel %s failed: %s\n", args.front().c_str(), err.str().c_str());
  return rc;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool run_pipeline(const fs::path& dir, double& elapsed) {
  const auto t0 = Clock::now();
  const std::string d = dir.string() + "/";
  bool ok = cli({"phantom", "cylinder", "--size", "256,256,128", "--r-out", "58", "--r-in", "40", "--sectors", "48",
                 "--frames", "2", "--shift", "1", "--out", dir.string()}) == 0;
  ok = ok && cli({"mask", "--input", d + "raw_t000.tif", "--annotations", d + "annotations.json", "--out",
                  d + "mask.tif", "--masked-raw", d + "masked_t000.tif"}) == 0;
  for (const char* f : {"000", "001"}) {
    const std::string t = f;
    ok = ok && cli({"peel", "--mask", d + "mask.tif", "--raw", d + "raw_t" + t + ".tif", "--surface", "apical", "--t",
                    "5", "--tol", "0.5", "--out", d + "peel_t" + t + ".tif"}) == 0;
    ok = ok && cli({"segment2d", "--peel", d + "peel_t" + t + ".tif", "--h", "4", "--out", d + "seg_t" + t + ".tif",
                    "--seeds-out", d + "seeds_t" + t + ".json"}) == 0;
  }
  ok = ok && cli({"track3d", "--labels", d + "labels_t%03d.tif", "--frames", "2", "--out", d + "tracks.csv"}) == 0;
  ok = ok && cli({"quantify", "--labels", d + "labels_t%03d.tif", "--tracks", d + "tracks.csv", "--features",
                  "volume,apical_area,ab_length", "--out", d + "features.csv"}) == 0;
  elapsed = seconds_since(t0);
  return ok;
}

Outcome determinism() {
  testing::TempDir tmp("acceptance");
  double t1 = 0, t2 = 0;
  const bool ok1 = run_pipeline(tmp / "run1", t1);
  const bool ok2 = run_pipeline(tmp / "run2", t2);
  std::size_t files = 0, differ = 0;
  if (ok1 && ok2) {
    for (const auto& e : fs::directory_iterator(tmp / "run1")) {
      const auto other = tmp / "run2" / e.path().filename();
      ++files;
      if (!fs::exists(other) || slurp(e.path()) != slurp(other)) ++differ;
    }
  }
  Outcome o;
  o.pass = ok1 && ok2 && files > 0 && differ == 0 && std::max(t1, t2) < 60.0;
  o.detail = std::string(ok1 && ok2 ? "" : "pipeline FAILED; ") + std::to_string(files) + " files, " +
             std::to_string(differ) + " differ; runs took " + fmt("%.1f", t1) + " s and " + fmt("%.1f", t2) +
             " s on 256x256x128";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"edm_exactness", edm_exactness},         {"shell_geometry", shell_geometry},
      {"peel_conservation", peel_conservation}, {"mask_interpolation", mask_interpolation},
      {"watershed", watershed_correctness},     {"tracking", tracking},
      {"quantification", quantification},       {"rectification", rectification},
      {"determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s  %-20s %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
  return failed ? 1 : 0;
}
