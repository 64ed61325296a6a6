#include "cellpeel/session.hpp"

#include <cstdio>
#include <random>
#include <set>

#include "cellpeel/formats.hpp"
#include "cellpeel/volume_io.hpp"

namespace cellpeel {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kModule = "pipeline-cli";

std::string random_token() {
  std::random_device rd;
  char buf[33];
  for (int i = 0; i < 4; ++i) std::snprintf(buf + 8 * i, 9, "%08x", rd());
  return std::string(buf, 32);
}

}  // namespace

void validate_partial_annotations(const AnnotationSet& set) {
  for (std::size_t i = 0; i < set.slices.size(); ++i) {
    const auto& s = set.slices[i];
    s.validate();
    if (s.slice_index >= set.dims.ny)
      throw InvalidArgument("masking", "slice index " + std::to_string(s.slice_index) + " outside the stack");
    if (i > 0 && s.slice_index <= set.slices[i - 1].slice_index)
      throw InvalidArgument("masking", "slice indices must be strictly increasing");
  }
}

Session::Session(const fs::path& workdir, const std::vector<fs::path>& frames) : workdir_(fs::absolute(workdir)) {
  fs::create_directories(workdir_);
  const auto state = workdir_ / "session.json";
  std::vector<fs::path> given;
  for (const auto& f : frames) given.push_back(fs::absolute(f));
  if (fs::exists(state)) {
    const auto j = read_json_file(state);
    try {
      id_ = j.at("id").get<std::string>();
      revision_ = j.at("revision").get<std::uint64_t>();
      for (const auto& f : j.at("frames")) frames_.emplace_back(f.get<std::string>());
    } catch (const json::exception& e) {
      throw FormatError(kModule, "bad session file: " + std::string(e.what()));
    }
    if (!given.empty() && given != frames_)
      throw InvalidArgument(kModule, "work directory belongs to a session on different stack files");
  } else {
    if (given.empty()) throw InvalidArgument(kModule, "a new session needs at least one stack file");
    for (const auto& f : given)
      if (!fs::exists(f)) throw IoError(kModule, "stack file not found: " + f.string());
    frames_ = given;
    id_ = random_token();
    revision_ = 0;
    json j = {{"id", id_}, {"revision", revision_}, {"frames", json::array()}};
    for (const auto& f : frames_) j["frames"].push_back(f.string());
    write_json_file(state, j);
  }
}

std::uint64_t Session::revision() const {
  std::shared_lock lock(mutex_);
  return revision_;
}

fs::path Session::frame_file(const char* stem, std::size_t frame) const {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_t%03zu", stem, frame);
  return workdir_ / (std::string(buf) + ".tif");
}

void Session::check_frame(std::size_t frame) const {
  if (frame >= frames_.size())
    throw NotFoundError("frame " + std::to_string(frame) + " does not exist (session has " +
                        std::to_string(frames_.size()) + ")");
}

void Session::check_revision(std::optional<std::uint64_t> expected) const {
  if (expected && *expected != revision_)
    throw ConflictError(revision_, "stale revision " + std::to_string(*expected) + ", current is " +
                                       std::to_string(revision_));
}

std::uint64_t Session::commit() {
  ++revision_;
  json j = {{"id", id_}, {"revision", revision_}, {"frames", json::array()}};
  for (const auto& f : frames_) j["frames"].push_back(f.string());
  write_json_file(workdir_ / "session.json", j);
  return revision_;
}

json Session::info() const {
  std::shared_lock lock(mutex_);
  const auto first = raw(0);
  const auto& d = first->dims();
  const auto& s = first->meta.spacing;
  json peels = json::array();
  for (std::size_t f = 0; f < frames_.size(); ++f)
    if (fs::exists(frame_file("peel", f))) peels.push_back(f);
  return {{"id", id_},
          {"revision", revision_},
          {"frames", frames_.size()},
          {"dims", {d.nx, d.ny, d.nz}},
          {"spacing", {s.x, s.y, s.z}},
          {"has_mask", fs::exists(workdir_ / "mask.tif")},
          {"peels", peels}};
}

std::shared_ptr<const IntensityVolume> Session::raw(std::size_t frame) const {
  check_frame(frame);
  std::lock_guard lock(cache_mutex_);
  auto& slot = raw_cache_[frame];
  if (!slot) slot = std::make_shared<const IntensityVolume>(load_stack(frames_[frame]));
  return slot;
}

std::optional<AnnotationSet> Session::annotations() const {
  std::shared_lock lock(mutex_);
  const auto p = workdir_ / "annotations.json";
  if (!fs::exists(p)) return std::nullopt;
  return load_annotations(p);
}

std::optional<SeedSet> Session::seeds(std::size_t frame) const {
  std::shared_lock lock(mutex_);
  check_frame(frame);
  char name[32];
  std::snprintf(name, sizeof name, "seeds_t%03zu.json", frame);
  const auto p = workdir_ / name;
  if (!fs::exists(p)) return std::nullopt;
  return load_seeds(p);
}

std::optional<FurrowLine> Session::furrow() const {
  std::shared_lock lock(mutex_);
  const auto p = workdir_ / "furrow.json";
  if (!fs::exists(p)) return std::nullopt;
  return load_furrow(p);
}

std::optional<PeelImage> Session::peel(std::size_t frame, bool rectified) const {
  std::shared_lock lock(mutex_);
  check_frame(frame);
  const auto p = frame_file(rectified ? "rectified" : "peel", frame);
  if (!fs::exists(p)) return std::nullopt;
  return load_peel(p);
}

std::uint64_t Session::put_annotations(const AnnotationSet& set, std::optional<std::uint64_t> expected) {
  std::unique_lock lock(mutex_);
  check_revision(expected);
  const auto& d = raw(0)->dims();
  if (!(set.dims == d)) throw InvalidArgument("masking", "annotation dims do not match the stack");
  validate_partial_annotations(set);
  save_annotations(set, workdir_ / "annotations.json");
  return commit();
}

std::uint64_t Session::put_seeds(std::size_t frame, const SeedSet& seeds, std::optional<std::uint64_t> expected) {
  std::unique_lock lock(mutex_);
  check_revision(expected);
  check_frame(frame);
  const auto p = frame_file("peel", frame);
  if (!fs::exists(p)) throw NotFoundError("peel for frame " + std::to_string(frame) + " has not been built");
  const auto pe = load_peel(p);
  seeds.validate(pe.width, pe.height);
  char name[32];
  std::snprintf(name, sizeof name, "seeds_t%03zu.json", frame);
  save_seeds(seeds, workdir_ / name);
  return commit();
}

std::uint64_t Session::put_furrow(const FurrowLine& furrow, std::optional<std::uint64_t> expected) {
  std::unique_lock lock(mutex_);
  check_revision(expected);
  furrow.validate();
  save_furrow(furrow, workdir_ / "furrow.json");
  return commit();
}

std::uint64_t Session::build_mask(std::optional<std::uint64_t> expected) {
  std::unique_lock lock(mutex_);
  check_revision(expected);
  const auto ap = workdir_ / "annotations.json";
  if (!fs::exists(ap)) throw NotFoundError("no annotations to build a mask from");
  const auto set = load_annotations(ap);
  set.validate();
  const auto first = raw(0);
  if (!(set.dims == first->dims())) throw InvalidArgument("masking", "annotation dims do not match the stack");
  auto mask = interpolate_masks(set, first->meta.spacing);
  mask.meta = first->meta;
  for (std::size_t f = 0; f < frames_.size(); ++f) save_stack(apply_mask_with_margin(*raw(f), mask), frame_file("masked", f));
  save_mask(mask, workdir_ / "mask.tif");
  return commit();
}

std::uint64_t Session::build_peels(Surface surface, const ShellParams& params, std::optional<std::uint64_t> expected) {
  std::unique_lock lock(mutex_);
  check_revision(expected);
  params.validate();
  const auto mp = workdir_ / "mask.tif";
  if (!fs::exists(mp)) throw NotFoundError("mask has not been built");
  const auto mask = load_mask(mp);
  for (std::size_t f = 0; f < frames_.size(); ++f) {
    auto r = raw(f);
    if (!(r->dims() == mask.dims())) throw InvalidArgument("peel", "mask and stack dimensions differ");
    save_peel(build_peel(mask, *r, surface, params), frame_file("peel", f));
  }
  return commit();
}

std::uint64_t Session::rectify_peels(std::optional<std::uint64_t> expected) {
  std::unique_lock lock(mutex_);
  check_revision(expected);
  const auto fp = workdir_ / "furrow.json";
  if (!fs::exists(fp)) throw NotFoundError("no furrow line has been stored");
  const auto furrow = load_furrow(fp);
  bool any = false;
  for (std::size_t f = 0; f < frames_.size(); ++f) {
    const auto p = frame_file("peel", f);
    if (!fs::exists(p)) continue;
    save_peel(rectify(load_peel(p), furrow), frame_file("rectified", f));
    any = true;
  }
  if (!any) throw NotFoundError("no peels have been built");
  return commit();
}

Segmentation Session::preview(std::size_t frame, const SegParams& params) const {
  const auto pe = peel(frame);
  if (!pe) throw NotFoundError("peel for frame " + std::to_string(frame) + " has not been built");
  return segment_peel(*pe, params, seeds(frame));
}

}  // namespace cellpeel
