#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "cellpeel/segment2d.hpp"
#include "cellpeel/shells.hpp"

using namespace cellpeel;

namespace {

Image2D<double> row_image(std::vector<double> v) {
  Image2D<double> img(v.size(), 1);
  img.data = std::move(v);
  return img;
}

Image2D<double> random_image(std::mt19937& rng, std::size_t w, std::size_t h, double hi) {
  Image2D<double> img(w, h);
  std::uniform_real_distribution<double> u(0, hi);
  for (auto& v : img.data) v = u(rng);
  return img;
}

// Repeated elementary erosion of the marker, floored at the mask, until stable.
Image2D<double> reconstruction_oracle(Image2D<double> marker, const Image2D<double>& mask, int conn) {
  bool changed = true;
  while (changed) {
    changed = false;
    auto next = marker;
    for (std::size_t r = 0; r < marker.height; ++r)
      for (std::size_t c = 0; c < marker.width; ++c) {
        double m = marker.at(c, r);
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            if ((dr == 0 && dc == 0) || (conn == 4 && dr != 0 && dc != 0)) continue;
            if (marker.in_bounds(long(c) + dc, long(r) + dr)) m = std::min(m, marker.at(c + dc, r + dr));
          }
        m = std::max(m, mask.at(c, r));
        if (m != next.at(c, r)) {
          next.at(c, r) = m;
          changed = true;
        }
      }
    marker = next;
  }
  return marker;
}

SeedSet seeds_at(std::vector<std::array<std::size_t, 2>> rc) {
  SeedSet s;
  std::uint32_t l = 1;
  for (auto [r, c] : rc) s.seeds.push_back({r, c, l++, SeedSource::Automatic});
  return s;
}

void check_partition(const LabelImage& labels, const SeedSet& seeds, int conn) {
  std::set<std::uint32_t> expect, seen;
  for (const auto& s : seeds.seeds) {
    expect.insert(s.label);
    CHECK(labels.at(s.col, s.row) == s.label);
  }
  for (auto v : labels.data) seen.insert(v);
  CHECK(seen == expect);
  for (auto l : expect) {
    Mask2D region(labels.width, labels.height);
    for (std::size_t i = 0; i < labels.data.size(); ++i) region.data[i] = labels.data[i] == l;
    const auto cc = connected_components(region, conn);
    CHECK(*std::max_element(cc.data.begin(), cc.data.end()) == 1);
  }
}

}  // namespace

TEST_CASE("reconstruction by erosion matches iterated erosion") {
  std::mt19937 rng(1);
  for (int conn : {4, 8})
    for (int trial = 0; trial < 5; ++trial) {
      const auto img = random_image(rng, 16, 12, 10);
      auto marker = img;
      for (auto& v : marker.data) v += 3;
      CHECK(reconstruct_by_erosion(marker, img, conn).data == reconstruction_oracle(marker, img, conn).data);
    }
}

TEST_CASE("h-minima on a 1D profile") {
  const auto img = row_image({5, 2, 5, 1, 5});
  SegParams p;
  p.h = 2;
  CHECK(h_minima_seeds(img, p).seeds.size() == 2);
  p.h = 4;
  CHECK(h_minima_seeds(img, p).seeds.size() == 1);
  CHECK(h_minima_seeds(row_image({3, 3, 3, 3}), SegParams{1, 4, false}).seeds.size() == 1);
}

TEST_CASE("seeds sit at the first plateau pixel in scan order") {
  const auto img = row_image({4, 1, 1, 4, 0, 0});
  const auto s = h_minima_seeds(img, SegParams{0, 4, false});
  REQUIRE(s.seeds.size() == 2);
  CHECK(s.seeds[0].col == 1);
  CHECK(s.seeds[0].label == 1);
  CHECK(s.seeds[1].col == 4);
  CHECK(s.seeds[1].label == 2);
}

TEST_CASE("inverted processing finds bright basins") {
  const auto img = row_image({0, 9, 0, 8, 0});
  const auto s = h_minima_seeds(img, SegParams{1, 4, true});
  REQUIRE(s.seeds.size() == 2);
  CHECK(s.seeds[0].col == 1);
  CHECK(s.seeds[1].col == 3);
}

TEST_CASE("seed count does not grow with h") {
  std::mt19937 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const auto img = random_image(rng, 24, 24, 20);
    std::size_t prev = SIZE_MAX;
    for (double h : {0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0}) {
      const auto n = h_minima_seeds(img, SegParams{h, 4, false}).seeds.size();
      CHECK(n <= prev);
      prev = n;
    }
  }
}

TEST_CASE("watershed on a valley-ridge-valley profile") {
  const auto img = row_image({0, 1, 9, 1, 0});
  const auto labels = seeded_watershed(img, seeds_at({{0, 0}, {0, 4}}), SegParams{});
  CHECK(labels.data == std::vector<std::uint32_t>{1, 1, 1, 2, 2});
  const auto one = seeded_watershed(img, seeds_at({{0, 2}}), SegParams{});
  CHECK(one.data == std::vector<std::uint32_t>(5, 1));
  CHECK_THROWS_AS(seeded_watershed(img, SeedSet{}, SegParams{}), InvalidArgument);
}

TEST_CASE("h = 0 watershed equals steepest-descent flooding") {
  std::mt19937 rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    auto img = random_image(rng, 20, 16, 1);
    const auto seeds = h_minima_seeds(img, SegParams{0, 4, false});
    const auto labels = seeded_watershed(img, seeds, SegParams{0, 4, false});
    LabelImage ref(img.width, img.height, 0);
    for (const auto& s : seeds.seeds) ref.at(s.col, s.row) = s.label;
    std::vector<std::size_t> order(img.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return img.data[a] < img.data[b]; });
    for (auto i : order) {
      if (ref.data[i]) continue;
      const long c = long(i % img.width), r = long(i / img.width);
      double best = 2;
      for (auto [dc, dr] : {std::pair{-1, 0}, {1, 0}, {0, -1}, {0, 1}})
        if (img.in_bounds(c + dc, r + dr)) {
          const auto j = std::size_t(c + dc) + img.width * std::size_t(r + dr);
          if (ref.data[j] && img.data[j] < best) best = img.data[j], ref.data[i] = ref.data[j];
        }
    }
    CHECK(labels.data == ref.data);
    check_partition(labels, seeds, 4);
  }
}

TEST_CASE("watershed partitions into connected regions") {
  std::mt19937 rng(4);
  for (int conn : {4, 8})
    for (int trial = 0; trial < 5; ++trial) {
      const auto img = random_image(rng, 30, 20, 50);
      const SegParams p{5, conn, false};
      const auto seeds = h_minima_seeds(img, p);
      const auto labels = seeded_watershed(img, seeds, p);
      check_partition(labels, seeds, conn);
      CHECK(seeded_watershed(img, seeds, p).data == labels.data);
    }
}

TEST_CASE("domain restricts flooding") {
  const auto img = row_image({0, 1, 2, 1, 0});
  Mask2D domain(5, 1, 1);
  domain.data[2] = 0;
  const auto labels = seeded_watershed(img, seeds_at({{0, 0}}), SegParams{}, domain);
  CHECK(labels.data == std::vector<std::uint32_t>{1, 1, 0, 0, 0});
  const auto s = h_minima_seeds(img, SegParams{0, 4, false}, domain);
  CHECK(s.seeds.size() == 2);
}

TEST_CASE("seed editing") {
  const auto base = seeds_at({{0, 0}, {0, 2}, {0, 4}});
  const auto added = edit_seeds(base, {{1, 1}}, {}, 5, 2);
  REQUIRE(added.seeds.size() == 4);
  CHECK(added.seeds.back().label == 4);
  CHECK(added.seeds.back().source == SeedSource::Manual);

  const auto replaced = edit_seeds(base, {{0, 2}}, {2}, 5, 2);
  CHECK(replaced.seeds.size() == 3);
  for (const auto& s : replaced.seeds)
    if (s.row == 0 && s.col == 2) CHECK(s.label != 2);

  // removed labels stay retired across later edits
  const auto removed = edit_seeds(base, {}, {3}, 5, 2);
  const auto again = edit_seeds(removed, {{1, 3}}, {}, 5, 2);
  CHECK(again.seeds.back().label == 4);

  CHECK_THROWS_AS(edit_seeds(base, {}, {9}, 5, 2), InvalidArgument);
  CHECK_THROWS_AS(edit_seeds(base, {{0, 0}}, {}, 5, 2), InvalidArgument);
  CHECK_THROWS_AS(edit_seeds(base, {{2, 0}}, {}, 5, 2), InvalidArgument);
}

TEST_CASE("seed set and parameter validation") {
  auto dup = seeds_at({{0, 0}, {0, 0}});
  CHECK_THROWS_AS(dup.validate(5, 1), InvalidArgument);
  auto same_label = seeds_at({{0, 0}, {0, 1}});
  same_label.seeds[1].label = 1;
  CHECK_THROWS_AS(same_label.validate(5, 1), InvalidArgument);
  CHECK_THROWS_AS((SegParams{-1, 4, false}.validate()), InvalidArgument);
  CHECK_THROWS_AS((SegParams{1, 6, false}.validate()), InvalidArgument);
}

TEST_CASE("boundaries lie between labels") {
  LabelImage l(4, 1);
  l.data = {1, 1, 2, 2};
  const auto b = label_boundaries(l);
  CHECK(b == std::vector<std::array<std::size_t, 2>>{{0, 1}, {0, 2}});
}
