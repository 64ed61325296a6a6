#include "cellpeel/cli.hpp"

#include <algorithm>
#include <csignal>
#include <filesystem>
#include <iostream>
#include <set>

#include <CLI11.hpp>

#include "cellpeel/formats.hpp"
#include "cellpeel/masking.hpp"
#include "cellpeel/phantom.hpp"
#include "cellpeel/pipeline.hpp"
#include "cellpeel/quantify.hpp"
#include "cellpeel/server.hpp"
#include "cellpeel/session.hpp"
#include "cellpeel/tracking.hpp"
#include "cellpeel/volume_io.hpp"

namespace cellpeel {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kModule = "pipeline-cli";

// Used by the signal handler of `serve`.
ApiServer* g_server = nullptr;

struct MaskArgs {
  std::string input, annotations, out, masked_raw;
};

struct PeelArgs {
  std::string mask, raw, out, surface = "apical", config;
  double t = 5.0, tol = 0.5;
  bool separate = false, no_fill = false;
};

struct RectifyArgs {
  std::string peel, furrow, out;
  bool separate = false;
};

struct SegmentArgs {
  std::string peel, out, seeds, seeds_out, config;
  double h = 4.0;
  int connectivity = 4;
  bool invert = false;
  std::vector<std::string> add;
  std::vector<std::uint32_t> remove;
};

struct TrackArgs {
  std::string labels, out, config;
  std::size_t frames = 0;
  double max_dist = 5.0;
  std::vector<double> spacing{1.0, 1.0};
  bool no_filter = false, split = false;
};

struct QuantifyArgs {
  std::string labels, tracks, peel, out, features = "volume,apical_area,ab_length", config;
  int shell_radius = 2;
  double plane_cell = 0, frame_interval = 0;
  bool all = false;
};

struct PhantomArgs {
  std::string out = ".";
  double r_out = 30, r_in = 15, groove_depth = 0, groove_width = 0.35, shift = 0, frame_interval = 40;
  std::size_t height = 64, frames = 1, sectors = 24, cell_length = 8, annotate_every = 8, margin = 4;
  std::vector<std::size_t> size;
  std::vector<double> spacing;
  std::uint64_t seed = 1;
  std::uint16_t noise = 3;
  // boxes
  int box_shift = 1;
  std::size_t box = 5, pitch = 10, offset = 2;
};

struct ServeArgs {
  std::string workdir, stack, host = "127.0.0.1";
  std::size_t frames = 1;
  int port = 8080;
};

void print_json(std::ostream& out, const json& j) { out << j.dump() << std::endl; }

std::vector<std::size_t> parse_row_col(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw InvalidArgument("segment2d", "seed position must be 'row,col', got '" + s + "'");
  try {
    return {std::stoul(s.substr(0, comma)), std::stoul(s.substr(comma + 1))};
  } catch (const std::exception&) {
    throw InvalidArgument("segment2d", "seed position must be 'row,col', got '" + s + "'");
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<fs::path> frame_paths(const std::string& pattern, std::size_t frames) {
  std::vector<fs::path> out;
  for (std::size_t f = 0; f < std::max<std::size_t>(frames, 1); ++f) out.emplace_back(expand_frame_pattern(pattern, f));
  return out;
}

/// Counts how many frames a pattern resolves to, stopping at the first gap.
std::size_t count_frames(const std::string& pattern) {
  std::size_t n = 0;
  while (true) {
    fs::path p;
    try {
      p = expand_frame_pattern(pattern, n);
    } catch (const InvalidArgument&) {
      return n == 0 ? 1 : n;
    }
    if (!fs::exists(p)) break;
    ++n;
  }
  if (n == 0) throw IoError(kModule, "no files match '" + pattern + "'");
  return n;
}

std::optional<PipelineConfig> maybe_config(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return load_config(path);
}

int run_mask(const MaskArgs& a, std::ostream& out) {
  const auto raw = load_stack(a.input);
  const auto set = load_annotations(a.annotations);
  if (!(set.dims == raw.dims())) throw InvalidArgument("masking", "annotation dims do not match the input stack");
  auto mask = interpolate_masks(set, raw.meta.spacing);
  mask.meta = raw.meta;
  save_mask(mask, a.out);
  json written = {a.out};
  if (!a.masked_raw.empty()) {
    save_stack(apply_mask_with_margin(raw, mask), a.masked_raw);
    written.push_back(a.masked_raw);
  }
  std::size_t voxels = 0;
  for (auto v : mask.data) voxels += v;
  print_json(out, {{"written", written}, {"mask_voxels", voxels}});
  return 0;
}

int run_peel(const PeelArgs& a, const CLI::App& cmd, std::ostream& out) {
  ShellParams p;
  const auto cfg = maybe_config(a.config);
  if (cfg) p = cfg->shell;
  if (cmd.count("--t") || !cfg) p.t = a.t;
  if (cmd.count("--tol") || !cfg) p.tol = a.tol;
  p.validate();
  const auto mask = load_mask(a.mask);
  const auto raw = load_stack(a.raw);
  const auto peel = build_peel(mask, raw, surface_from_string(a.surface), p, !a.no_fill);
  save_peel(peel, a.out, a.separate);
  print_json(out, {{"written", a.out}, {"width", peel.width}, {"height", peel.height}, {"first_slice", peel.first_slice}});
  return 0;
}

int run_rectify(const RectifyArgs& a, std::ostream& out) {
  const auto peel = load_peel(a.peel);
  const auto rect = rectify(peel, load_furrow(a.furrow));
  save_peel(rect, a.out, a.separate);
  print_json(out, {{"written", a.out}});
  return 0;
}

int run_segment(const SegmentArgs& a, const CLI::App& cmd, std::ostream& out) {
  SegParams p;
  const auto cfg = maybe_config(a.config);
  if (cfg) p = cfg->seg;
  if (cmd.count("--h") || !cfg) p.h = a.h;
  if (cmd.count("--connectivity") || !cfg) p.connectivity = a.connectivity;
  p.invert = a.invert;
  p.validate();
  const auto peel = load_peel(a.peel);
  std::optional<SeedSet> seeds;
  if (!a.seeds.empty()) seeds = load_seeds(a.seeds);
  if (!a.add.empty() || !a.remove.empty()) {
    if (!seeds) seeds = h_minima_seeds(peel_intensity(peel), p, peel.used_region());
    std::vector<std::array<std::size_t, 2>> add;
    for (const auto& s : a.add) {
      const auto rc = parse_row_col(s);
      add.push_back({rc[0], rc[1]});
    }
    seeds = edit_seeds(*seeds, add, a.remove, peel.width, peel.height);
  }
  const auto seg = segment_peel(peel, p, seeds);
  save_label_image(seg.labels, a.out);
  if (!a.seeds_out.empty()) save_seeds(seg.seeds, a.seeds_out);
  print_json(out, {{"written", a.out}, {"seeds", seg.seeds.seeds.size()}});
  return 0;
}

int run_track2d(const TrackArgs& a, const CLI::App& cmd, std::ostream& out) {
  TrackParams p;
  const auto cfg = maybe_config(a.config);
  if (cfg) p = cfg->track;
  if (cmd.count("--max-dist") || !cfg) p.max_dist = a.max_dist;
  if (a.spacing.size() != 2) throw InvalidArgument("tracking", "--spacing takes two values: column and row spacing");
  p.spacing = Spacing{a.spacing[0], a.spacing[1], 1.0};
  p.validate();
  const std::size_t n = a.frames ? a.frames : count_frames(a.labels);
  std::vector<LabelImage> frames;
  for (const auto& path : frame_paths(a.labels, n)) frames.push_back(load_label_image(path));
  auto table = track_2d(frames, p);
  if (!a.no_filter) {
    std::vector<std::set<std::uint32_t>> boundary;
    for (const auto& f : frames) boundary.push_back(boundary_labels(f));
    table = filter_complete_tracks(table, frames.size(), boundary);
  }
  save_tracks(table, a.out);
  print_json(out, {{"written", a.out}, {"tracks", table.track_ids().size()}, {"frames", n}});
  return 0;
}

int run_track3d(const TrackArgs& a, std::ostream& out) {
  const std::size_t n = a.frames ? a.frames : count_frames(a.labels);
  std::vector<LabelVolume> frames;
  for (const auto& path : frame_paths(a.labels, n)) {
    auto v = load_labels(path);
    frames.push_back(a.split ? split_label_components(v) : std::move(v));
  }
  auto table = track_3d_overlap(frames);
  if (!a.no_filter) {
    std::vector<std::set<std::uint32_t>> boundary;
    for (const auto& f : frames) boundary.push_back(boundary_labels(f));
    table = filter_complete_tracks(table, frames.size(), boundary);
  }
  save_tracks(table, a.out);
  std::size_t kept = 0;
  for (auto id : table.track_ids()) {
    const auto* r = table.find(id, 0);
    if (r && r->status != TrackStatus::Discarded) ++kept;
  }
  print_json(out, {{"written", a.out}, {"tracks", table.track_ids().size()}, {"complete", kept}, {"frames", n}});
  return 0;
}

int run_quantify(const QuantifyArgs& a, const CLI::App& cmd, std::ostream& out) {
  QuantifyParams qp;
  const auto cfg = maybe_config(a.config);
  if (cfg) qp = cfg->quantify;
  if (cmd.count("--shell-radius") || !cfg) qp.shell_radius = a.shell_radius;
  if (a.plane_cell > 0) qp.plane_cell = a.plane_cell;
  qp.validate();

  static const std::set<std::string> kFeatures3d{"volume", "apical_area", "ab_length"};
  static const std::set<std::string> kFeatures2d{"area", "eccentricity", "speed"};
  std::vector<std::string> f3, f2;
  for (const auto& f : split_list(a.features)) {
    if (kFeatures3d.count(f)) f3.push_back(f);
    else if (kFeatures2d.count(f)) f2.push_back(f);
    else throw InvalidArgument("quantify", "unknown feature '" + f + "'");
  }
  if (!f2.empty() && !f3.empty()) throw InvalidArgument("quantify", "2D peel features and 3D features need separate runs");
  if (!f2.empty() && a.peel.empty()) throw InvalidArgument("quantify", "2D features need --peel");

  auto tracks = load_tracks(a.tracks);
  if (!a.all)
    tracks.rows.erase(std::remove_if(tracks.rows.begin(), tracks.rows.end(),
                                     [](const TrackRow& r) { return r.status == TrackStatus::Discarded; }),
                      tracks.rows.end());
  std::size_t n = 0;
  for (const auto& r : tracks.rows) n = std::max(n, r.frame + 1);

  FeatureTable table;
  for (std::size_t f = 0; f < n; ++f) {
    if (tracks.frame_rows(f).empty()) continue;
    const auto path = expand_frame_pattern(a.labels, f);
    if (!f3.empty()) {
      table.append(quantify_3d(load_labels(path), tracks, f, qp, f3));
    } else {
      const auto peel = load_peel(expand_frame_pattern(a.peel, f));
      std::optional<double> dt;
      if (a.frame_interval > 0) dt = a.frame_interval;
      auto rows = features_2d(load_label_image(path), peel, tracks, f, dt);
      for (auto& r : rows.rows)
        if (std::find(f2.begin(), f2.end(), r.feature) != f2.end()) table.rows.push_back(std::move(r));
    }
  }
  table.sort();
  table.validate();
  save_features(table, a.out);
  print_json(out, {{"written", a.out}, {"rows", table.rows.size()}});
  return 0;
}

int run_phantom_cylinder(const PhantomArgs& a, std::ostream& out) {
  CylinderPhantom p;
  p.r_out = a.r_out;
  p.r_in = a.r_in;
  p.height = a.height;
  p.groove_depth = a.groove_depth;
  p.groove_half_width = a.groove_width;
  p.margin = a.margin;
  p.sectors = a.sectors;
  p.cell_length = a.cell_length;
  p.shift = a.shift;
  p.seed = a.seed;
  p.noise = a.noise;
  if (a.frame_interval > 0) p.frame_interval = a.frame_interval;
  if (!a.size.empty()) {
    if (a.size.size() != 3) throw InvalidArgument(kModule, "--size takes nx,ny,nz");
    p.dims = Dims{a.size[0], a.size[1], a.size[2]};
  }
  if (!a.spacing.empty()) {
    if (a.spacing.size() != 3) throw InvalidArgument(kModule, "--spacing takes sx,sy,sz");
    p.spacing = Spacing{a.spacing[0], a.spacing[1], a.spacing[2]};
  }
  p.validate();
  const fs::path dir(a.out);
  fs::create_directories(dir);
  json written = json::array();
  json label_counts = json::array();
  for (std::size_t f = 0; f < std::max<std::size_t>(a.frames, 1); ++f) {
    const auto raw_path = dir / expand_frame_pattern("raw_t%03d.tif", f);
    const auto lab_path = dir / expand_frame_pattern("labels_t%03d.tif", f);
    save_stack(cylinder_raw(p, f), raw_path);
    const auto labels = cylinder_labels(p, f);
    save_stack(labels, lab_path);
    std::set<std::uint32_t> distinct(labels.data.begin(), labels.data.end());
    distinct.erase(0);
    label_counts.push_back(distinct.size());
    written.push_back(raw_path.string());
    written.push_back(lab_path.string());
  }
  save_annotations(cylinder_annotations(p, a.annotate_every), dir / "annotations.json");
  const auto d = p.grid();
  json truth = {{"kind", "cylinder"},
                {"r_out", p.r_out},
                {"r_in", p.r_in},
                {"height", p.height},
                {"groove_depth", p.groove_depth},
                {"dims", {d.nx, d.ny, d.nz}},
                {"spacing", {p.spacing.x, p.spacing.y, p.spacing.z}},
                {"frames", std::max<std::size_t>(a.frames, 1)},
                {"shift", p.shift},
                {"sectors", p.sectors},
                {"cell_length", p.cell_length},
                {"seed", p.seed},
                {"noise", p.noise},
                {"label_counts", label_counts}};
  if (p.frame_interval) truth["frame_interval_s"] = *p.frame_interval;
  write_json_file(dir / "truth.json", truth);
  written.push_back((dir / "annotations.json").string());
  written.push_back((dir / "truth.json").string());
  print_json(out, {{"written", written}});
  return 0;
}

int run_phantom_boxes(const PhantomArgs& a, std::ostream& out) {
  if (a.size.size() != 3) throw InvalidArgument(kModule, "--size takes nx,ny,nz");
  const Dims d{a.size[0], a.size[1], a.size[2]};
  const auto frames = translated_boxes(d, std::max<std::size_t>(a.frames, 1), a.box_shift, a.box, a.pitch, a.offset);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  std::set<std::uint32_t> touching;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    auto v = frames[f];
    if (a.frame_interval > 0) v.meta.frame_interval = a.frame_interval;
    save_stack(v, dir / expand_frame_pattern("labels_t%03d.tif", f));
    const auto b = boundary_labels(frames[f]);
    touching.insert(b.begin(), b.end());
  }
  std::set<std::uint32_t> all(frames[0].data.begin(), frames[0].data.end());
  all.erase(0);
  json interior = json::array();
  for (auto l : all)
    if (!touching.count(l)) interior.push_back(l);
  write_json_file(dir / "truth.json", {{"kind", "boxes"},
                                       {"dims", {d.nx, d.ny, d.nz}},
                                       {"frames", frames.size()},
                                       {"shift", a.box_shift},
                                       {"objects", all.size()},
                                       {"interior", interior}});
  print_json(out, {{"written", dir.string()}, {"objects", all.size()}});
  return 0;
}

int run_serve(const ServeArgs& a, std::ostream& out) {
  std::vector<fs::path> frames;
  if (!a.stack.empty()) frames = frame_paths(a.stack, a.frames);
  Session session(a.workdir, frames);
  ApiServer server(session);
  const int port = server.bind(a.host, a.port);
  print_json(out, {{"host", a.host}, {"port", port}, {"session", session.id()}, {"revision", session.revision()}});
  g_server = &server;
  auto previous_int = std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  auto previous_term = std::signal(SIGTERM, [](int) {
    if (g_server) g_server->stop();
  });
  server.run();
  std::signal(SIGINT, previous_int);
  std::signal(SIGTERM, previous_term);
  g_server = nullptr;
  return 0;
}

}  // namespace

json error_json(const std::exception& e) {
  std::string module = kModule, type = "internal";
  if (const auto* ce = dynamic_cast<const Error*>(&e)) {
    module = ce->module();
    if (dynamic_cast<const ConflictError*>(&e)) type = "conflict";
    else if (dynamic_cast<const NotFoundError*>(&e)) type = "not_found";
    else if (dynamic_cast<const InvalidArgument*>(&e)) type = "invalid_argument";
    else if (dynamic_cast<const FormatError*>(&e)) type = "format";
    else if (dynamic_cast<const IoError*>(&e)) type = "io";
    else if (dynamic_cast<const ComputeError*>(&e)) type = "compute";
    else type = "error";
  } else if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) {
    type = "io";
  }
  return {{"error", {{"module", module}, {"type", type}, {"message", e.what()}}}};
}

int run_subcommand(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Surface peeling, segmentation, tracking and quantification for volumetric cell imaging", "cellpeel"};
  app.require_subcommand(1, 1);

  MaskArgs mask;
  auto* c_mask = app.add_subcommand("mask", "Interpolate annotated polygons into a 3D mask");
  c_mask->add_option("--input", mask.input, "Raw stack")->required();
  c_mask->add_option("--annotations", mask.annotations, "Annotation JSON")->required();
  c_mask->add_option("--out", mask.out, "Mask TIFF")->required();
  c_mask->add_option("--masked-raw", mask.masked_raw, "Raw stack with the mask and its bright margin applied");

  PeelArgs peel;
  auto* c_peel = app.add_subcommand("peel", "Project a mask shell onto a 2D peel");
  c_peel->add_option("--mask", peel.mask)->required();
  c_peel->add_option("--raw", peel.raw)->required();
  c_peel->add_option("--out", peel.out)->required();
  c_peel->add_option("--surface", peel.surface)->check(CLI::IsMember({"apical", "basal"}));
  c_peel->add_option("--t", peel.t, "Shell distance, px");
  c_peel->add_option("--tol", peel.tol, "Shell half-width, px");
  c_peel->add_option("--config", peel.config);
  c_peel->add_flag("--separate", peel.separate, "Write one TIFF per channel");
  c_peel->add_flag("--no-fill", peel.no_fill, "Leave invalid pixels unfilled");

  RectifyArgs rect;
  auto* c_rect = app.add_subcommand("rectify", "Shift peel rows so a clicked furrow becomes vertical and centred");
  c_rect->add_option("--peel", rect.peel)->required();
  c_rect->add_option("--furrow", rect.furrow)->required();
  c_rect->add_option("--out", rect.out)->required();
  c_rect->add_flag("--separate", rect.separate);

  SegmentArgs seg;
  auto* c_seg = app.add_subcommand("segment2d", "Seeded watershed on a peel");
  c_seg->set_help_flag("--help", "Print this help message and exit");
  c_seg->add_option("--peel", seg.peel)->required();
  c_seg->add_option("--out", seg.out, "Label image TIFF")->required();
  c_seg->add_option("--h", seg.h, "h-minima depth");
  c_seg->add_option("--connectivity", seg.connectivity)->check(CLI::IsMember({4, 8}));
  c_seg->add_flag("--invert", seg.invert, "Cells are bright");
  c_seg->add_option("--seeds", seg.seeds, "Seed JSON to use instead of h-minima seeds");
  c_seg->add_option("--add", seg.add, "Add a seed at row,col")->allow_extra_args(false);
  c_seg->add_option("--remove", seg.remove, "Remove the seed with this label")->allow_extra_args(false);
  c_seg->add_option("--seeds-out", seg.seeds_out, "Write the seeds used");
  c_seg->add_option("--config", seg.config);

  TrackArgs t2;
  auto* c_t2 = app.add_subcommand("track2d", "Nearest-neighbour tracking of peel segmentations");
  c_t2->add_option("--labels", t2.labels, "Label image pattern, e.g. seg_t%03d.tif")->required();
  c_t2->add_option("--out", t2.out)->required();
  c_t2->add_option("--frames", t2.frames, "Frame count (default: until the first missing file)");
  c_t2->add_option("--max-dist", t2.max_dist, "Gating radius, um");
  c_t2->add_option("--spacing", t2.spacing, "Column and row spacing, um")->delimiter(',')->expected(2);
  c_t2->add_flag("--no-filter", t2.no_filter, "Keep incomplete and boundary tracks as they are");
  c_t2->add_option("--config", t2.config);

  TrackArgs t3;
  auto* c_t3 = app.add_subcommand("track3d", "Largest-overlap tracking of 3D label volumes");
  c_t3->add_option("--labels", t3.labels, "Label stack pattern, e.g. labels_t%03d.tif")->required();
  c_t3->add_option("--out", t3.out)->required();
  c_t3->add_option("--frames", t3.frames);
  c_t3->add_option("--max-dist", t3.max_dist, "Accepted for symmetry with track2d; overlap needs no gate");
  c_t3->add_flag("--no-filter", t3.no_filter);
  c_t3->add_flag("--split-components", t3.split, "Give every connected piece of a label its own label first");

  QuantifyArgs q;
  auto* c_q = app.add_subcommand("quantify", "Per-cell features");
  c_q->add_option("--labels", q.labels, "Label pattern (3D stacks, or 2D peel labels)")->required();
  c_q->add_option("--tracks", q.tracks)->required();
  c_q->add_option("--out", q.out)->required();
  c_q->add_option("--features", q.features, "Comma list: volume,apical_area,ab_length or area,eccentricity,speed");
  c_q->add_option("--peel", q.peel, "Peel pattern, for 2D features");
  c_q->add_option("--shell-radius", q.shell_radius);
  c_q->add_option("--plane-cell", q.plane_cell, "Grid cell for projected area, um (default: x spacing)");
  c_q->add_option("--frame-interval", q.frame_interval, "Seconds between frames, for speed");
  c_q->add_flag("--all", q.all, "Include discarded tracks");
  c_q->add_option("--config", q.config);

  PhantomArgs ph;
  auto* c_ph = app.add_subcommand("phantom", "Write synthetic test data");
  c_ph->require_subcommand(1, 1);
  auto* c_cyl = c_ph->add_subcommand("cylinder", "Hollow cylinder epithelium with cells, annotations and truth");
  c_cyl->add_option("--r-out", ph.r_out);
  c_cyl->add_option("--r-in", ph.r_in);
  c_cyl->add_option("--height", ph.height);
  c_cyl->add_option("--groove-depth", ph.groove_depth);
  c_cyl->add_option("--groove-width", ph.groove_width, "Groove half-width, radians");
  c_cyl->add_option("--frames", ph.frames);
  c_cyl->add_option("--shift", ph.shift, "y translation per frame, voxels");
  c_cyl->add_option("--frame-interval", ph.frame_interval);
  c_cyl->add_option("--size", ph.size, "nx,ny,nz")->delimiter(',')->expected(3);
  c_cyl->add_option("--spacing", ph.spacing, "sx,sy,sz")->delimiter(',')->expected(3);
  c_cyl->add_option("--margin", ph.margin);
  c_cyl->add_option("--sectors", ph.sectors);
  c_cyl->add_option("--cell-length", ph.cell_length);
  c_cyl->add_option("--annotate-every", ph.annotate_every);
  c_cyl->add_option("--seed", ph.seed);
  c_cyl->add_option("--noise", ph.noise, "Noise amplitude added to every voxel");
  c_cyl->add_option("--out", ph.out);
  auto* c_box = c_ph->add_subcommand("boxes", "Translated label boxes for tracking tests");
  c_box->add_option("--size", ph.size, "nx,ny,nz")->delimiter(',')->expected(3)->required();
  c_box->add_option("--frames", ph.frames);
  c_box->add_option("--shift", ph.box_shift, "x translation per frame, voxels");
  c_box->add_option("--box", ph.box);
  c_box->add_option("--pitch", ph.pitch);
  c_box->add_option("--offset", ph.offset);
  c_box->add_option("--frame-interval", ph.frame_interval);
  c_box->add_option("--out", ph.out);

  ServeArgs sv;
  auto* c_sv = app.add_subcommand("serve", "Serve the annotation HTTP API for a work directory");
  c_sv->add_option("--workdir", sv.workdir)->required();
  c_sv->add_option("--stack", sv.stack, "Raw stack or frame pattern (new sessions)");
  c_sv->add_option("--frames", sv.frames);
  c_sv->add_option("--host", sv.host);
  c_sv->add_option("--port", sv.port, "0 picks a free port");

  std::vector<const char*> argv{"cellpeel"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << json{{"error", {{"module", kModule}, {"type", "usage"}, {"message", e.what()}}}}.dump() << std::endl;
    return 2;
  }

  try {
    if (c_mask->parsed()) return run_mask(mask, out);
    if (c_peel->parsed()) return run_peel(peel, *c_peel, out);
    if (c_rect->parsed()) return run_rectify(rect, out);
    if (c_seg->parsed()) return run_segment(seg, *c_seg, out);
    if (c_t2->parsed()) return run_track2d(t2, *c_t2, out);
    if (c_t3->parsed()) return run_track3d(t3, out);
    if (c_q->parsed()) return run_quantify(q, *c_q, out);
    if (c_cyl->parsed()) return run_phantom_cylinder(ph, out);
    if (c_box->parsed()) return run_phantom_boxes(ph, out);
    if (c_sv->parsed()) return run_serve(sv, out);
  } catch (const std::exception& e) {
    err << error_json(e).dump() << std::endl;
    return 1;
  }
  return 2;
}

}  // namespace cellpeel
