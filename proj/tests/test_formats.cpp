#include <doctest.h>

#include <fstream>
#include <random>

#include "cellpeel/formats.hpp"
#include "cellpeel/volume_io.hpp"
#include "test_support.hpp"

using namespace cellpeel;
using nlohmann::json;
namespace fs = std::filesystem;

TEST_CASE("annotation JSON round-trip") {
  AnnotationSet set;
  set.dims = {64, 40, 48};
  SliceAnnotation a;
  a.slice_index = 0;
  a.outer = {{1.5, 2.25}, {30, 2}, {30.125, 40}, {2, 41}};
  a.inner = Polygon{{10, 10}, {20, 10}, {20, 20}};
  SliceAnnotation b;
  b.slice_index = 39;
  b.outer = {{0.1, 0.2}, {50, 0.3}, {25, 44.7}};
  set.slices = {a, b};

  const auto j = annotations_to_json(set);
  CHECK(j["version"] == 1);
  CHECK(j["axis"] == "y");
  CHECK(j["dims"] == json::array({64, 40, 48}));
  CHECK(j["slices"][1]["inner"].is_null());
  const auto back = annotations_from_json(j);
  CHECK(back.dims == set.dims);
  REQUIRE(back.slices.size() == 2);
  CHECK(back.slices[0].outer == a.outer);
  CHECK(back.slices[0].inner == a.inner);
  CHECK_FALSE(back.slices[1].inner.has_value());
  CHECK(annotations_to_json(back).dump() == j.dump());

  auto bad = j;
  bad["axis"] = "x";
  CHECK_THROWS_AS(annotations_from_json(bad), FormatError);
  bad = j;
  bad["slices"][0]["outer"] = json::array({json::array({1})});
  CHECK_THROWS_AS(annotations_from_json(bad), FormatError);
}

TEST_CASE("seed and furrow JSON round-trip") {
  SeedSet s;
  s.seeds = {{3, 4, 1, SeedSource::Automatic}, {7, 1, 5, SeedSource::Manual}};
  s.next_label = 9;
  const auto j = seeds_to_json(s);
  CHECK(j["seeds"][1]["src"] == "manual");
  const auto back = seeds_from_json(j);
  CHECK(back.seeds == s.seeds);
  CHECK(back.next_label == 9);
  CHECK(seeds_from_json(json::parse(R"({"seeds":[{"row":1,"col":2,"label":3,"src":"auto"}]})")).seeds.size() == 1);
  CHECK_THROWS_AS(seeds_from_json(json::parse(R"({"seeds":[{"row":1,"col":2,"label":3,"src":"robot"}]})")),
                  FormatError);

  FurrowLine f{{{0, 10.5}, {12, 30}}};
  CHECK(furrow_from_json(furrow_to_json(f)).points == f.points);
  CHECK_THROWS_AS(furrow_from_json(json::parse(R"({"points":[[0]]})")), FormatError);
}

TEST_CASE("files are written whole") {
  testing::TempDir dir("fmt");
  const auto path = dir / "seeds.json";
  SeedSet s;
  s.seeds = {{0, 0, 1, SeedSource::Automatic}};
  save_seeds(s, path);
  CHECK(load_seeds(path).seeds == s.seeds);
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir.path())) ++files;
  CHECK(files == 1);
  CHECK_THROWS_AS(read_json_file(dir / "none.json"), IoError);
  std::ofstream(dir / "broken.json") << "{";
  CHECK_THROWS_AS(read_json_file(dir / "broken.json"), FormatError);
}

TEST_CASE("numbers print shortest round-trip text") {
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(18.05) == "18.05");
  CHECK(format_number(3) == "3");
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng);
    CHECK(std::stod(format_number(v)) == v);
  }
}

TEST_CASE("track CSV round-trip") {
  TrackTable t;
  t.rows = {{1, 0, 1, {0.1, 2.5, 1.0 / 3}, TrackStatus::Active},
            {1, 1, 4, {0.3, 2.5, 1.0 / 7}, TrackStatus::Active},
            {2, 0, 2, {5, 6, 7}, TrackStatus::Discarded}};
  const auto csv = tracks_to_csv(t);
  CHECK(csv.rfind("track_id,frame,label,cx,cy,cz,status\n", 0) == 0);
  CHECK(tracks_from_csv(csv).rows == t.rows);
  CHECK_THROWS_AS(tracks_from_csv("track_id,frame\n1,2\n"), FormatError);
  CHECK_THROWS_AS(tracks_from_csv("track_id,frame,label,cx,cy,cz,status\n1,0,1,0,0,0,lost\n"), FormatError);
}

TEST_CASE("feature CSV round-trip") {
  FeatureTable t;
  t.rows = {{1, 0, "volume", 18.05, "um^3"}, {1, 0, "eccentricity", 0.8660254037844386, "dimensionless"}};
  const auto csv = features_to_csv(t);
  CHECK(csv.rfind("track_id,frame,feature,value,unit\n", 0) == 0);
  CHECK(features_from_csv(csv).rows == t.rows);
  CHECK_THROWS_AS(features_from_csv("track_id,frame,feature,value,unit\n1,0,volume,abc,um^3\n"), FormatError);
}

TEST_CASE("peel files") {
  testing::TempDir dir("fmt");
  PeelImage p(5, 3);
  p.first_slice = 4;
  p.spacing = {0.19, 0.19, 0.19};
  p.row_length = {5, 4, 3};
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < p.row_length[r]; ++c) {
      p.intensity[p.index(c, r)] = double(10 * r + c);
      p.metric[p.index(c, r)] = (c % 2) ? std::sqrt(2.0) : 1.0;
      p.valid[p.index(c, r)] = c != 1;
    }
  for (bool separate : {false, true}) {
    const auto path = dir / (separate ? "sep.tif" : "peel.tif");
    save_peel(p, path, separate);
    if (separate) {
      CHECK(fs::exists(dir / "sep_intensity.tif"));
      CHECK(fs::exists(dir / "sep_metric.tif"));
      CHECK(fs::exists(dir / "sep_valid.tif"));
    }
    const auto q = load_peel(path);
    CHECK(q.width == 5);
    CHECK(q.height == 3);
    CHECK(q.first_slice == 4);
    CHECK(q.row_length == p.row_length);
    CHECK(q.intensity == p.intensity);
    CHECK(q.valid == p.valid);
    CHECK(q.spacing.x == doctest::Approx(0.19));
    for (std::size_t i = 0; i < p.metric.size(); ++i) CHECK(q.metric[i] == doctest::Approx(p.metric[i]).epsilon(1e-3));
  }
  CHECK(peel_intensity(p).at(2, 1) == 12);
}

TEST_CASE("pipeline config") {
  const auto j = json::parse(R"({"input": "raw_t%03d.tif", "spacing": [0.19, 0.19, 0.5],
                                 "shell": {"t": 6, "tol": 0.75}, "seg": {"h": 3, "connectivity": 8},
                                 "track": {"max_dist": 4}, "quantify": {"shell_radius": 3}})");
  const auto c = config_from_json(j);
  CHECK(c.input_pattern == "raw_t%03d.tif");
  CHECK(c.spacing->z == 0.5);
  CHECK(c.shell.t == 6);
  CHECK(c.seg.connectivity == 8);
  CHECK(c.track.max_dist == 4);
  CHECK(c.quantify.shell_radius == 3);
  CHECK(config_from_json(config_to_json(c)).shell.tol == 0.75);
  CHECK(config_from_json(json::object()).shell.t == 5.0);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"shell": {"t": 0.1, "tol": 0.5}})")), InvalidArgument);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"seg": {"h": "high"}})")), FormatError);
}

TEST_CASE("frame patterns") {
  CHECK(expand_frame_pattern("labels_t%03d.tif", 7) == "labels_t007.tif");
  CHECK(expand_frame_pattern("f%d.tif", 12) == "f12.tif");
  CHECK(expand_frame_pattern("single.tif", 0) == "single.tif");
  CHECK_THROWS_AS(expand_frame_pattern("single.tif", 1), InvalidArgument);
}
