#include "cellpeel/formats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <regex>
#include <sstream>

#include "cellpeel/volume_io.hpp"

namespace cellpeel {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

template <typename Err = FormatError>
[[noreturn]] void bad(const char* module, const std::string& msg) {
  throw Err(module, msg);
}

json polygon_to_json(const Polygon& p) {
  json a = json::array();
  for (const auto& v : p) a.push_back({v.x, v.z});
  return a;
}

Polygon polygon_from_json(const json& j) {
  if (!j.is_array()) bad("masking", "polygon must be an array of [x, z] pairs");
  Polygon p;
  for (const auto& v : j) {
    if (!v.is_array() || v.size() != 2) bad("masking", "polygon vertex must be [x, z]");
    p.push_back({v[0].get<double>(), v[1].get<double>()});
  }
  return p;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

template <typename T>
T parse_int(const std::string& s, const char* module, const char* what) {
  T v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) bad(module, std::string("bad ") + what + " '" + s + "'");
  return v;
}

double parse_double(const std::string& s, const char* module, const char* what) {
  double v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) bad(module, std::string("bad ") + what + " '" + s + "'");
  return v;
}

std::vector<std::string> csv_lines(const std::string& text, const std::string& header, const char* module) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.empty() || lines.front() != header) bad(module, "expected CSV header '" + header + "'");
  lines.erase(lines.begin());
  return lines;
}

std::string read_text(const fs::path& path, const char* module) {
  std::ifstream in(path, std::ios::binary);
  if (!in) bad<IoError>(module, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename Fn>
auto with_json_errors(const char* module, Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw FormatError(module, e.what());
  }
}

fs::path channel_path(const fs::path& path, const char* channel) {
  return path.parent_path() / (path.stem().string() + "_" + channel + ".tif");
}

}  // namespace

json annotations_to_json(const AnnotationSet& set) {
  json slices = json::array();
  for (const auto& s : set.slices)
    slices.push_back({{"index", s.slice_index},
                      {"outer", polygon_to_json(s.outer)},
                      {"inner", s.inner ? polygon_to_json(*s.inner) : json(nullptr)}});
  return {{"version", 1},
          {"axis", "y"},
          {"dims", {set.dims.nx, set.dims.ny, set.dims.nz}},
          {"slices", slices}};
}

AnnotationSet annotations_from_json(const json& j) {
  return with_json_errors("masking", [&] {
    if (!j.is_object()) bad("masking", "annotations must be a JSON object");
    if (j.value("version", 1) != 1) bad("masking", "unsupported annotation version");
    if (j.value("axis", std::string("y")) != "y") bad("masking", "annotations must be drawn along the y axis");
    AnnotationSet set;
    const auto& d = j.at("dims");
    if (!d.is_array() || d.size() != 3) bad("masking", "dims must be [nx, ny, nz]");
    set.dims = {d[0].get<std::size_t>(), d[1].get<std::size_t>(), d[2].get<std::size_t>()};
    for (const auto& s : j.at("slices")) {
      SliceAnnotation a;
      a.slice_index = s.at("index").get<std::size_t>();
      a.outer = polygon_from_json(s.at("outer"));
      if (s.contains("inner") && !s["inner"].is_null()) a.inner = polygon_from_json(s["inner"]);
      set.slices.push_back(std::move(a));
    }
    return set;
  });
}

json seeds_to_json(const SeedSet& seeds) {
  json arr = json::array();
  for (const auto& s : seeds.seeds)
    arr.push_back({{"row", s.row},
                   {"col", s.col},
                   {"label", s.label},
                   {"src", s.source == SeedSource::Manual ? "manual" : "auto"}});
  return {{"seeds", arr}, {"next_label", std::max(seeds.next_label, seeds.max_label() + 1)}};
}

SeedSet seeds_from_json(const json& j) {
  return with_json_errors("segment2d", [&] {
    SeedSet out;
    for (const auto& s : j.at("seeds")) {
      Seed seed;
      seed.row = s.at("row").get<std::size_t>();
      seed.col = s.at("col").get<std::size_t>();
      seed.label = s.at("label").get<std::uint32_t>();
      const auto src = s.value("src", std::string("auto"));
      if (src != "auto" && src != "manual") bad("segment2d", "seed src must be 'auto' or 'manual'");
      seed.source = src == "manual" ? SeedSource::Manual : SeedSource::Automatic;
      out.seeds.push_back(seed);
    }
    out.next_label = j.value("next_label", 0u);
    return out;
  });
}

json furrow_to_json(const FurrowLine& furrow) {
  json pts = json::array();
  for (const auto& p : furrow.points) pts.push_back({p[0], p[1]});
  return {{"points", pts}};
}

FurrowLine furrow_from_json(const json& j) {
  return with_json_errors("peel", [&] {
    FurrowLine f;
    for (const auto& p : j.at("points")) {
      if (!p.is_array() || p.size() != 2) bad("peel", "furrow point must be [row, col]");
      f.points.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    return f;
  });
}

json read_json_file(const fs::path& path) {
  const auto text = read_text(path, "pipeline-cli");
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError("pipeline-cli", path.string() + ": " + e.what());
  }
}

void write_text_file(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) bad<IoError>("pipeline-cli", "cannot write " + path.string());
    out << text;
    if (!out) bad<IoError>("pipeline-cli", "write failed for " + path.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) bad<IoError>("pipeline-cli", "cannot replace " + path.string() + ": " + ec.message());
}

void write_json_file(const fs::path& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

AnnotationSet load_annotations(const fs::path& path) { return annotations_from_json(read_json_file(path)); }
void save_annotations(const AnnotationSet& set, const fs::path& path) { write_json_file(path, annotations_to_json(set)); }
SeedSet load_seeds(const fs::path& path) { return seeds_from_json(read_json_file(path)); }
void save_seeds(const SeedSet& seeds, const fs::path& path) { write_json_file(path, seeds_to_json(seeds)); }
FurrowLine load_furrow(const fs::path& path) { return furrow_from_json(read_json_file(path)); }
void save_furrow(const FurrowLine& furrow, const fs::path& path) { write_json_file(path, furrow_to_json(furrow)); }

std::string format_number(double v) {
  if (v == 0) return "0";
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string tracks_to_csv(const TrackTable& table) {
  std::string out = "track_id,frame,label,cx,cy,cz,status\n";
  for (const auto& r : table.rows) {
    out += std::to_string(r.track_id) + ',' + std::to_string(r.frame) + ',' + std::to_string(r.label) + ',' +
           format_number(r.centroid[0]) + ',' + format_number(r.centroid[1]) + ',' + format_number(r.centroid[2]) +
           ',' + to_string(r.status) + '\n';
  }
  return out;
}

TrackTable tracks_from_csv(const std::string& text) {
  TrackTable t;
  for (const auto& line : csv_lines(text, "track_id,frame,label,cx,cy,cz,status", "tracking")) {
    const auto f = split(line, ',');
    if (f.size() != 7) bad("tracking", "track row needs 7 fields: " + line);
    TrackRow r;
    r.track_id = parse_int<std::uint32_t>(f[0], "tracking", "track id");
    r.frame = parse_int<std::size_t>(f[1], "tracking", "frame");
    r.label = parse_int<std::uint32_t>(f[2], "tracking", "label");
    for (int k = 0; k < 3; ++k) r.centroid[k] = parse_double(f[3 + k], "tracking", "centroid");
    r.status = track_status_from_string(f[6]);
    t.rows.push_back(r);
  }
  t.validate();
  return t;
}

void save_tracks(const TrackTable& table, const fs::path& path) { write_text_file(path, tracks_to_csv(table)); }
TrackTable load_tracks(const fs::path& path) { return tracks_from_csv(read_text(path, "tracking")); }

std::string features_to_csv(const FeatureTable& table) {
  std::string out = "track_id,frame,feature,value,unit\n";
  for (const auto& r : table.rows)
    out += std::to_string(r.track_id) + ',' + std::to_string(r.frame) + ',' + r.feature + ',' +
           format_number(r.value) + ',' + r.unit + '\n';
  return out;
}

FeatureTable features_from_csv(const std::string& text) {
  FeatureTable t;
  for (const auto& line : csv_lines(text, "track_id,frame,feature,value,unit", "quantify")) {
    const auto f = split(line, ',');
    if (f.size() != 5) bad("quantify", "feature row needs 5 fields: " + line);
    t.rows.push_back({parse_int<std::uint32_t>(f[0], "quantify", "track id"),
                      parse_int<std::size_t>(f[1], "quantify", "frame"), f[2],
                      parse_double(f[3], "quantify", "value"), f[4]});
  }
  t.validate();
  return t;
}

void save_features(const FeatureTable& table, const fs::path& path) { write_text_file(path, features_to_csv(table)); }
FeatureTable load_features(const fs::path& path) { return features_from_csv(read_text(path, "quantify")); }

void save_peel(const PeelImage& peel, const fs::path& path, bool separate) {
  const std::size_t n = peel.width * peel.height;
  if (n == 0) bad<InvalidArgument>("volume-io", "cannot save an empty peel");
  auto clamp16 = [](double v) {
    return static_cast<std::uint32_t>(std::clamp(std::lround(v), 0L, 65535L));
  };
  std::vector<std::uint32_t> intensity(n), metric(n), valid(n);
  for (std::size_t i = 0; i < n; ++i) {
    intensity[i] = clamp16(peel.intensity[i]);
    metric[i] = clamp16(peel.metric[i] * 1000.0);
    valid[i] = peel.valid[i] ? 255 : 0;
  }
  SidecarMeta side;
  side.spacing = peel.spacing;
  side.row_lengths = peel.row_length;
  side.first_slice = peel.first_slice;
  if (separate) {
    const std::pair<const char*, std::vector<std::uint32_t>*> channels[] = {
        {"intensity", &intensity}, {"metric", &metric}, {"valid", &valid}};
    for (const auto& [name, values] : channels) {
      const auto p = channel_path(path, name);
      detail::write_tiff(p, peel.width, peel.height, 1, 1, 16, *values, peel.spacing);
      write_sidecar(p, side);
    }
    return;
  }
  std::vector<std::uint32_t> all;
  all.reserve(3 * n);
  for (const auto* v : {&intensity, &metric, &valid}) all.insert(all.end(), v->begin(), v->end());
  detail::write_tiff(path, peel.width, peel.height, 1, 3, 16, all, peel.spacing);
  write_sidecar(path, side);
}

PeelImage load_peel(const fs::path& path) {
  std::vector<std::uint32_t> channels[3];
  std::size_t w = 0, h = 0;
  fs::path meta_path = path;
  if (!fs::exists(path) && fs::exists(channel_path(path, "intensity"))) {
    const char* names[] = {"intensity", "metric", "valid"};
    for (int c = 0; c < 3; ++c) {
      auto raw = detail::read_tiff(channel_path(path, names[c]), false);
      if (raw.pages != 1) bad("volume-io", "peel channel must be a single page");
      if (c > 0 && (raw.width != w || raw.height != h)) bad("volume-io", "peel channels differ in size");
      w = raw.width;
      h = raw.height;
      channels[c] = std::move(raw.values);
    }
    meta_path = channel_path(path, "intensity");
  } else {
    auto raw = detail::read_tiff(path, true);
    if (raw.pages != 1 || raw.samples != 3) bad("volume-io", "peel file must be one page with 3 samples: " + path.string());
    w = raw.width;
    h = raw.height;
    const std::size_t n = w * h;
    for (int c = 0; c < 3; ++c)
      channels[c].assign(raw.values.begin() + c * n, raw.values.begin() + (c + 1) * n);
  }
  PeelImage peel(w, h);
  for (std::size_t i = 0; i < w * h; ++i) {
    peel.intensity[i] = channels[0][i];
    peel.metric[i] = channels[1][i] / 1000.0;
    peel.valid[i] = channels[2][i] ? 1 : 0;
  }
  peel.source.clear();
  const auto side = read_sidecar(meta_path);
  if (!side || !side->row_lengths) bad("volume-io", "peel sidecar with row_lengths missing for " + path.string());
  if (side->row_lengths->size() != h) bad("volume-io", "peel row_lengths does not match the image height");
  peel.row_length = *side->row_lengths;
  for (auto l : peel.row_length)
    if (l > w) bad("volume-io", "peel row length exceeds the image width");
  if (side->spacing) peel.spacing = *side->spacing;
  peel.first_slice = side->first_slice.value_or(0);
  return peel;
}

Image2D<double> peel_intensity(const PeelImage& peel) {
  Image2D<double> img(peel.width, peel.height);
  img.data = peel.intensity;
  return img;
}

PipelineConfig config_from_json(const json& j) {
  return with_json_errors("pipeline-cli", [&] {
    PipelineConfig c;
    c.input_pattern = j.value("input", std::string());
    if (j.contains("spacing") && !j["spacing"].is_null()) {
      const auto& s = j["spacing"];
      if (!s.is_array() || s.size() != 3) bad("pipeline-cli", "spacing must be [sx, sy, sz]");
      c.spacing = Spacing{s[0].get<double>(), s[1].get<double>(), s[2].get<double>()};
    }
    if (j.contains("shell")) {
      c.shell.t = j["shell"].value("t", c.shell.t);
      c.shell.tol = j["shell"].value("tol", c.shell.tol);
    }
    if (j.contains("seg")) {
      c.seg.h = j["seg"].value("h", c.seg.h);
      c.seg.connectivity = j["seg"].value("connectivity", c.seg.connectivity);
    }
    if (j.contains("track")) c.track.max_dist = j["track"].value("max_dist", c.track.max_dist);
    if (j.contains("quantify")) c.quantify.shell_radius = j["quantify"].value("shell_radius", c.quantify.shell_radius);
    c.shell.validate();
    c.seg.validate();
    c.track.validate();
    c.quantify.validate();
    return c;
  });
}

json config_to_json(const PipelineConfig& c) {
  json j = {{"input", c.input_pattern},
            {"shell", {{"t", c.shell.t}, {"tol", c.shell.tol}}},
            {"seg", {{"h", c.seg.h}, {"connectivity", c.seg.connectivity}}},
            {"track", {{"max_dist", c.track.max_dist}}},
            {"quantify", {{"shell_radius", c.quantify.shell_radius}}}};
  j["spacing"] = c.spacing ? json{c.spacing->x, c.spacing->y, c.spacing->z} : json(nullptr);
  return j;
}

PipelineConfig load_config(const fs::path& path) { return config_from_json(read_json_file(path)); }

std::string expand_frame_pattern(const std::string& pattern, std::size_t frame) {
  static const std::regex spec(R"(%0?\d*d)");
  std::smatch m;
  if (!std::regex_search(pattern, m, spec)) {
    if (frame == 0) return pattern;
    throw InvalidArgument("pipeline-cli", "pattern '" + pattern + "' has no frame number field");
  }
  const std::string field = m.str();
  char buf[64];
  std::snprintf(buf, sizeof buf, field.c_str(), static_cast<int>(frame));
  return m.prefix().str() + buf + m.suffix().str();
}

}  // namespace cellpeel
