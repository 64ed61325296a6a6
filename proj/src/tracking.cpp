#include "cellpeel/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <tuple>
#include <unordered_map>

#include "cellpeel/shells.hpp"

namespace cellpeel {

namespace {

constexpr const char* kModule = "tracking";

void finalize(TrackTable& table, std::size_t n_frames) {
  std::sort(table.rows.begin(), table.rows.end(),
            [](const TrackRow& a, const TrackRow& b) { return std::tie(a.track_id, a.frame) < std::tie(b.track_id, b.frame); });
  std::map<std::uint32_t, std::size_t> last_frame;
  for (const auto& r : table.rows) last_frame[r.track_id] = std::max(last_frame[r.track_id], r.frame);
  for (auto& r : table.rows)
    r.status = last_frame[r.track_id] + 1 == n_frames ? TrackStatus::Active : TrackStatus::Ended;
}

template <typename Grid>
std::uint32_t max_label_of(const Grid& g) {
  return g.data.empty() ? 0 : *std::max_element(g.data.begin(), g.data.end());
}

}  // namespace

const char* to_string(TrackStatus s) {
  switch (s) {
    case TrackStatus::Active: return "active";
    case TrackStatus::Ended: return "ended";
    case TrackStatus::Discarded: return "discarded";
  }
  return "active";
}

TrackStatus track_status_from_string(const std::string& s) {
  if (s == "active") return TrackStatus::Active;
  if (s == "ended") return TrackStatus::Ended;
  if (s == "discarded") return TrackStatus::Discarded;
  throw FormatError(kModule, "unknown track status '" + s + "'");
}

void TrackParams::validate() const {
  if (!(max_dist > 0)) throw InvalidArgument(kModule, "max_dist must be positive");
  if (frame_interval && !(*frame_interval > 0)) throw InvalidArgument(kModule, "frame interval must be positive");
}

void TrackTable::validate() const {
  std::map<std::uint32_t, std::vector<std::size_t>> frames;
  std::set<std::pair<std::size_t, std::uint32_t>> objects;
  for (const auto& r : rows) {
    frames[r.track_id].push_back(r.frame);
    if (!objects.insert({r.frame, r.label}).second)
      throw InvalidArgument(kModule, "object " + std::to_string(r.label) + " in frame " + std::to_string(r.frame) +
                                         " belongs to two tracks");
  }
  for (auto& [id, fs] : frames) {
    std::sort(fs.begin(), fs.end());
    for (std::size_t i = 1; i < fs.size(); ++i) {
      if (fs[i] == fs[i - 1])
        throw InvalidArgument(kModule, "track " + std::to_string(id) + " has two objects in frame " + std::to_string(fs[i]));
      if (fs[i] != fs[i - 1] + 1) throw InvalidArgument(kModule, "track " + std::to_string(id) + " skips frames");
    }
  }
}

std::vector<const TrackRow*> TrackTable::frame_rows(std::size_t frame) const {
  std::vector<const TrackRow*> out;
  for (const auto& r : rows)
    if (r.frame == frame) out.push_back(&r);
  return out;
}

const TrackRow* TrackTable::find(std::uint32_t track_id, std::size_t frame) const {
  for (const auto& r : rows)
    if (r.track_id == track_id && r.frame == frame) return &r;
  return nullptr;
}

std::set<std::uint32_t> TrackTable::track_ids() const {
  std::set<std::uint32_t> ids;
  for (const auto& r : rows) ids.insert(r.track_id);
  return ids;
}

std::vector<ObjectCentroid> object_centroids(const LabelImage& labels, const Spacing& spacing) {
  std::map<std::uint32_t, ObjectCentroid> acc;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto l = labels.data[i];
    if (!l) continue;
    auto& o = acc[l];
    o.label = l;
    ++o.count;
    o.centroid[0] += static_cast<double>(i % labels.width);
    o.centroid[1] += static_cast<double>(i / labels.width);
  }
  std::vector<ObjectCentroid> out;
  for (auto& [l, o] : acc) {
    o.centroid = {o.centroid[0] / o.count * spacing.x, o.centroid[1] / o.count * spacing.y, 0.0};
    out.push_back(o);
  }
  return out;
}

std::vector<ObjectCentroid> object_centroids(const LabelVolume& labels) {
  std::map<std::uint32_t, ObjectCentroid> acc;
  for (std::size_t i = 0; i < labels.data.size(); ++i) {
    const auto l = labels.data[i];
    if (!l) continue;
    const auto [x, y, z] = labels.coords(i);
    auto& o = acc[l];
    o.label = l;
    ++o.count;
    o.centroid[0] += static_cast<double>(x);
    o.centroid[1] += static_cast<double>(y);
    o.centroid[2] += static_cast<double>(z);
  }
  const auto& s = labels.meta.spacing;
  std::vector<ObjectCentroid> out;
  for (auto& [l, o] : acc) {
    const double n = static_cast<double>(o.count);
    o.centroid = {o.centroid[0] / n * s.x, o.centroid[1] / n * s.y, o.centroid[2] / n * s.z};
    out.push_back(o);
  }
  return out;
}

TrackTable track_2d(const std::vector<LabelImage>& frames, const TrackParams& params) {
  params.validate();
  if (frames.empty()) throw InvalidArgument(kModule, "tracking needs at least one frame");
  TrackTable table;
  std::vector<std::pair<std::uint32_t, ObjectCentroid>> previous;  // (track, object)
  std::uint32_t next_track = 1;
  for (const auto& o : object_centroids(frames[0], params.spacing)) {
    previous.push_back({o.label, o});
    table.rows.push_back({o.label, 0, o.label, o.centroid, TrackStatus::Active});
    next_track = std::max(next_track, o.label + 1);
  }

  for (std::size_t f = 1; f < frames.size(); ++f) {
    const auto current = object_centroids(frames[f], params.spacing);
    // (distance, previous label, current label, previous index, current index)
    std::vector<std::tuple<double, std::uint32_t, std::uint32_t, std::size_t, std::size_t>> candidates;
    for (std::size_t p = 0; p < previous.size(); ++p)
      for (std::size_t c = 0; c < current.size(); ++c) {
        const auto& a = previous[p].second.centroid;
        const auto& b = current[c].centroid;
        const double d = std::hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]);
        if (d <= params.max_dist) candidates.push_back({d, previous[p].second.label, current[c].label, p, c});
      }
    std::sort(candidates.begin(), candidates.end());
    std::vector<std::uint8_t> prev_used(previous.size(), 0);
    std::vector<std::uint32_t> assigned(current.size(), 0);
    for (const auto& [d, pl, cl, p, c] : candidates) {
      if (prev_used[p] || assigned[c]) continue;
      prev_used[p] = 1;
      assigned[c] = previous[p].first;
    }
    std::vector<std::pair<std::uint32_t, ObjectCentroid>> now;
    for (std::size_t c = 0; c < current.size(); ++c) {
      const std::uint32_t id = assigned[c] ? assigned[c] : next_track++;
      now.push_back({id, current[c]});
      table.rows.push_back({id, f, current[c].label, current[c].centroid, TrackStatus::Active});
    }
    previous = std::move(now);
  }
  finalize(table, frames.size());
  return table;
}

TrackTable track_3d_overlap(const std::vector<LabelVolume>& frames) {
  if (frames.empty()) throw InvalidArgument(kModule, "tracking needs at least one frame");
  for (const auto& f : frames)
    if (!(f.dims() == frames[0].dims())) throw InvalidArgument(kModule, "label volumes differ in size between frames");

  TrackTable table;
  std::unordered_map<std::uint32_t, std::uint32_t> track_of;  // label in previous frame -> track
  std::uint32_t next_track = max_label_of(frames[0]) + 1;
  for (const auto& o : object_centroids(frames[0])) {
    track_of[o.label] = o.label;
    table.rows.push_back({o.label, 0, o.label, o.centroid, TrackStatus::Active});
  }

  for (std::size_t f = 1; f < frames.size(); ++f) {
    const auto& prev = frames[f - 1].data;
    const auto& cur = frames[f].data;
    std::unordered_map<std::uint64_t, std::size_t> overlap;
    for (std::size_t i = 0; i < cur.size(); ++i)
      if (cur[i] && prev[i]) ++overlap[(static_cast<std::uint64_t>(cur[i]) << 32) | prev[i]];

    // Best partner per current object: (count, previous label).
    std::map<std::uint32_t, std::pair<std::size_t, std::uint32_t>> best;
    for (const auto& [key, count] : overlap) {
      const auto c = static_cast<std::uint32_t>(key >> 32);
      const auto p = static_cast<std::uint32_t>(key & 0xFFFFFFFFu);
      auto it = best.find(c);
      if (it == best.end() || count > it->second.first || (count == it->second.first && p < it->second.second))
        best[c] = {count, p};
    }

    const auto objects = object_centroids(frames[f]);
    // Claims per track: (count, current label), winner = largest count then smaller label.
    std::map<std::uint32_t, std::vector<std::pair<std::size_t, std::uint32_t>>> claims;
    for (const auto& o : objects) {
      auto it = best.find(o.label);
      if (it != best.end()) claims[track_of.at(it->second.second)].push_back({it->second.first, o.label});
    }
    std::unordered_map<std::uint32_t, std::uint32_t> next_track_of;
    for (auto& [track, list] : claims) {
      std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
      });
      next_track_of[list.front().second] = track;
      if (list.size() > 1) table.conflicted.insert(track);
    }
    for (const auto& o : objects) {
      std::uint32_t id;
      if (auto it = next_track_of.find(o.label); it != next_track_of.end()) {
        id = it->second;
      } else {
        id = next_track++;
        if (best.count(o.label)) table.conflicted.insert(id);
        next_track_of[o.label] = id;
      }
      table.rows.push_back({id, f, o.label, o.centroid, TrackStatus::Active});
    }
    track_of = std::move(next_track_of);
  }
  finalize(table, frames.size());
  return table;
}

std::set<std::uint32_t> boundary_labels(const LabelVolume& labels) {
  std::set<std::uint32_t> out;
  const auto& d = labels.dims();
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x) {
        const bool face = x == 0 || y == 0 || z == 0 || x + 1 == d.nx || y + 1 == d.ny || z + 1 == d.nz;
        if (face && labels.at(x, y, z)) out.insert(labels.at(x, y, z));
      }
  return out;
}

std::set<std::uint32_t> boundary_labels(const LabelImage& labels) {
  std::set<std::uint32_t> out;
  for (std::size_t r = 0; r < labels.height; ++r)
    for (std::size_t c = 0; c < labels.width; ++c) {
      const bool edge = r == 0 || c == 0 || r + 1 == labels.height || c + 1 == labels.width;
      if (edge && labels.at(c, r)) out.insert(labels.at(c, r));
    }
  return out;
}

TrackTable filter_complete_tracks(const TrackTable& tracks, std::size_t n_frames,
                                  const std::vector<std::set<std::uint32_t>>& boundary_objects) {
  std::map<std::uint32_t, std::set<std::size_t>> frames;
  std::set<std::uint32_t> rejected(tracks.conflicted.begin(), tracks.conflicted.end());
  for (const auto& r : tracks.rows) {
    frames[r.track_id].insert(r.frame);
    if (r.frame < boundary_objects.size() && boundary_objects[r.frame].count(r.label)) rejected.insert(r.track_id);
  }
  for (const auto& [id, fs] : frames) {
    const bool complete = fs.size() == n_frames && !fs.empty() && *fs.begin() == 0 && *fs.rbegin() + 1 == n_frames;
    if (!complete) rejected.insert(id);
  }
  TrackTable out = tracks;
  for (auto& r : out.rows)
    if (rejected.count(r.track_id)) r.status = TrackStatus::Discarded;
  return out;
}

LabelVolume split_label_components(const LabelVolume& labels, int connectivity) {
  const auto offsets = neighbour_offsets_3d(connectivity);
  LabelVolume out(labels.meta, 0);
  std::vector<std::size_t> stack;
  std::uint32_t next = 0;
  for (std::size_t i = 0; i < labels.data.size(); ++i) {
    const auto l = labels.data[i];
    if (!l || out.data[i]) continue;
    out.data[i] = ++next;
    stack.assign(1, i);
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      const auto [x, y, z] = labels.coords(cur);
      for (const auto& o : offsets) {
        const long nx = static_cast<long>(x) + o[0], ny = static_cast<long>(y) + o[1], nz = static_cast<long>(z) + o[2];
        if (!labels.in_bounds(nx, ny, nz)) continue;
        const std::size_t n = labels.index(nx, ny, nz);
        if (labels.data[n] == l && !out.data[n]) {
          out.data[n] = next;
          stack.push_back(n);
        }
      }
    }
  }
  return out;
}

}  // namespace cellpeel
