#include "cellpeel/segment2d.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <set>
#include <string>
#include <tuple>

#include "cellpeel/shells.hpp"

namespace cellpeel {

namespace {

constexpr const char* kModule = "segment2d";

bool in_domain(const Mask2D& domain, std::size_t i) { return domain.empty() || domain.data[i]; }

template <typename Fn>
void for_neighbours(std::size_t w, std::size_t h, std::size_t i, const std::vector<std::array<int, 2>>& offs, Fn&& fn) {
  const long c = static_cast<long>(i % w), r = static_cast<long>(i / w);
  for (const auto& o : offs) {
    const long nc = c + o[0], nr = r + o[1];
    if (nc < 0 || nr < 0 || nc >= static_cast<long>(w) || nr >= static_cast<long>(h)) continue;
    fn(static_cast<std::size_t>(nc) + w * static_cast<std::size_t>(nr));
  }
}

void check_domain(const Image2D<double>& img, const Mask2D& domain) {
  if (!domain.empty() && (domain.width != img.width || domain.height != img.height))
    throw InvalidArgument(kModule, "domain mask and image dimensions differ");
}

Image2D<double> working_image(const Image2D<double>& img, const SegParams& params, const Mask2D& domain) {
  if (!params.invert) return img;
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < img.size(); ++i)
    if (in_domain(domain, i)) hi = std::max(hi, img.data[i]);
  Image2D<double> out = img;
  for (auto& v : out.data) v = hi - v;
  return out;
}

}  // namespace

void SegParams::validate() const {
  if (!(h >= 0.0)) throw InvalidArgument(kModule, "h must be >= 0");
  if (connectivity != 4 && connectivity != 8) throw InvalidArgument(kModule, "connectivity must be 4 or 8");
}

std::uint32_t SeedSet::max_label() const {
  std::uint32_t m = 0;
  for (const auto& s : seeds) m = std::max(m, s.label);
  return m;
}

void SeedSet::validate(std::size_t width, std::size_t height) const {
  std::set<std::uint32_t> labels;
  std::set<std::pair<std::size_t, std::size_t>> positions;
  for (const auto& s : seeds) {
    if (s.label < 1) throw InvalidArgument(kModule, "seed labels must be >= 1");
    if (s.row >= height || s.col >= width)
      throw InvalidArgument(kModule, "seed at (" + std::to_string(s.row) + ", " + std::to_string(s.col) + ") outside the image");
    if (!labels.insert(s.label).second) throw InvalidArgument(kModule, "duplicate seed label " + std::to_string(s.label));
    if (!positions.insert({s.row, s.col}).second)
      throw InvalidArgument(kModule, "two seeds at (" + std::to_string(s.row) + ", " + std::to_string(s.col) + ")");
  }
}

Image2D<double> reconstruct_by_erosion(const Image2D<double>& marker, const Image2D<double>& mask, int connectivity,
                                       const Mask2D& domain) {
  const auto offs = neighbour_offsets_2d(connectivity);
  Image2D<double> r(mask.width, mask.height);
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> pq;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    r.data[i] = std::max(marker.data[i], mask.data[i]);
    if (in_domain(domain, i)) pq.push({r.data[i], i});
  }
  // Minimax propagation: each pixel ends at the lowest level from which the
  // marker can reach it without dipping below the mask.
  while (!pq.empty()) {
    const auto [v, i] = pq.top();
    pq.pop();
    if (v != r.data[i]) continue;
    for_neighbours(mask.width, mask.height, i, offs, [&](std::size_t n) {
      if (!in_domain(domain, n)) return;
      const double nv = std::max(v, mask.data[n]);
      if (nv < r.data[n]) {
        r.data[n] = nv;
        pq.push({nv, n});
      }
    });
  }
  return r;
}

SeedSet h_minima_seeds(const Image2D<double>& img, const SegParams& params, const Mask2D& domain) {
  params.validate();
  check_domain(img, domain);
  const auto work = working_image(img, params, domain);
  Image2D<double> marker = work;
  for (auto& v : marker.data) v += params.h;
  const auto hmin = reconstruct_by_erosion(marker, work, params.connectivity, domain);

  const auto offs = neighbour_offsets_2d(params.connectivity);
  std::vector<std::uint8_t> seen(img.size(), 0);
  std::vector<std::size_t> stack;
  SeedSet out;
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (seen[i] || !in_domain(domain, i)) continue;
    const double level = hmin.data[i];
    bool minimum = true;
    seen[i] = 1;
    stack.assign(1, i);
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      for_neighbours(img.width, img.height, cur, offs, [&](std::size_t n) {
        if (!in_domain(domain, n)) return;
        if (hmin.data[n] < level) minimum = false;
        if (hmin.data[n] == level && !seen[n]) {
          seen[n] = 1;
          stack.push_back(n);
        }
      });
    }
    if (minimum) {
      const auto label = static_cast<std::uint32_t>(out.seeds.size() + 1);
      out.seeds.push_back({i / img.width, i % img.width, label, SeedSource::Automatic});
    }
  }
  out.next_label = static_cast<std::uint32_t>(out.seeds.size() + 1);
  return out;
}

SeedSet edit_seeds(const SeedSet& seeds, const std::vector<std::array<std::size_t, 2>>& add_row_col,
                   const std::vector<std::uint32_t>& remove_labels, std::size_t width, std::size_t height) {
  SeedSet out = seeds;
  std::uint32_t next = std::max(seeds.next_label, seeds.max_label() + 1);
  for (auto label : remove_labels) {
    auto it = std::find_if(out.seeds.begin(), out.seeds.end(), [&](const Seed& s) { return s.label == label; });
    if (it == out.seeds.end()) throw InvalidArgument(kModule, "cannot remove unknown seed label " + std::to_string(label));
    out.seeds.erase(it);
  }
  for (const auto& [row, col] : add_row_col) {
    if (row >= height || col >= width)
      throw InvalidArgument(kModule, "new seed at (" + std::to_string(row) + ", " + std::to_string(col) + ") outside the image");
    if (std::any_of(out.seeds.begin(), out.seeds.end(), [&](const Seed& s) { return s.row == row && s.col == col; }))
      throw InvalidArgument(kModule, "position (" + std::to_string(row) + ", " + std::to_string(col) + ") already has a seed");
    out.seeds.push_back({row, col, next++, SeedSource::Manual});
  }
  out.next_label = next;
  return out;
}

LabelImage seeded_watershed(const Image2D<double>& img, const SeedSet& seeds, const SegParams& params,
                            const Mask2D& domain) {
  params.validate();
  check_domain(img, domain);
  if (seeds.seeds.empty()) throw InvalidArgument(kModule, "watershed needs at least one seed");
  seeds.validate(img.width, img.height);
  const auto work = working_image(img, params, domain);
  const auto offs = neighbour_offsets_2d(params.connectivity);

  // (intensity, insertion sequence, pixel, label)
  using Entry = std::tuple<double, std::uint64_t, std::size_t, std::uint32_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> pq;
  std::uint64_t seq = 0;
  for (const auto& s : seeds.seeds) {
    const std::size_t i = s.col + img.width * s.row;
    if (!in_domain(domain, i))
      throw InvalidArgument(kModule, "seed " + std::to_string(s.label) + " lies outside the segmentation domain");
    pq.push({work.data[i], seq++, i, s.label});
  }

  LabelImage labels(img.width, img.height, 0);
  while (!pq.empty()) {
    const auto [v, order, i, label] = pq.top();
    pq.pop();
    if (labels.data[i]) continue;
    labels.data[i] = label;
    for_neighbours(img.width, img.height, i, offs, [&](std::size_t n) {
      if (labels.data[n] || !in_domain(domain, n)) return;
      pq.push({work.data[n], seq++, n, label});
    });
  }
  return labels;
}

std::vector<std::array<std::size_t, 2>> label_boundaries(const LabelImage& labels) {
  std::vector<std::array<std::size_t, 2>> out;
  const auto offs = neighbour_offsets_2d(4);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels.data[i]) continue;
    bool edge = false;
    for_neighbours(labels.width, labels.height, i, offs, [&](std::size_t n) { edge = edge || labels.data[n] != labels.data[i]; });
    if (edge) out.push_back({i / labels.width, i % labels.width});
  }
  return out;
}

}  // namespace cellpeel
