#include <doctest.h>

#include <atomic>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "cellpeel/cli.hpp"
#include "cellpeel/formats.hpp"
#include "cellpeel/server.hpp"
#include "cellpeel/session.hpp"
#include "cellpeel/volume_io.hpp"
#include "test_support.hpp"

using namespace cellpeel;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_subcommand(args, out, err);
  return {code, out.str(), err.str()};
}

void make_phantom(const fs::path& dir, int frames = 2) {
  const auto r = cli({"phantom", "cylinder", "--size", "80,40,80", "--r-out", "26", "--r-in", "12", "--sectors", "16",
                      "--frames", std::to_string(frames), "--shift", "1", "--out", dir.string()});
  REQUIRE(r.code == 0);
}

bool is_png(const std::string& body) { return body.size() > 8 && body.compare(1, 3, "PNG") == 0; }

// Server on a free port, running on its own thread for the test's lifetime.
class LiveServer {
 public:
  explicit LiveServer(Session& s) : server_(s) {
    port_ = server_.bind("127.0.0.1", 0);
    thread_ = std::thread([this] { server_.run(); });
    server_.wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }
  ~LiveServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Client& client() { return *client_; }

  json get(const std::string& path, int expect = 200) {
    auto res = client_->Get(path);
    REQUIRE(res);
    CHECK(res->status == expect);
    return json::parse(res->body);
  }
  json send(const std::string& method, const std::string& path, const json& body, int expect = 200) {
    auto res = method == "PUT" ? client_->Put(path, body.dump(), "application/json")
                               : client_->Post(path, body.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == expect);
    return json::parse(res->body);
  }

 private:
  ApiServer server_;
  int port_ = 0;
  std::thread thread_;
  std::unique_ptr<httplib::Client> client_;
};

}  // namespace

TEST_CASE("command line pipeline on a phantom") {
  testing::TempDir tmp("cli");
  make_phantom(tmp.path(), 3);
  const std::string d = tmp.path().string() + "/";
  for (const char* f : {"raw_t000.tif", "labels_t002.tif", "annotations.json", "truth.json"})
    CHECK(fs::exists(tmp / f));

  auto r = cli({"mask", "--input", d + "raw_t000.tif", "--annotations", d + "annotations.json", "--out", d + "mask.tif",
                "--masked-raw", d + "masked_t000.tif"});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["mask_voxels"].get<std::size_t>() > 0);
  CHECK(load_stack(tmp / "masked_t000.tif").dims().nx == 80);

  for (std::string f : {"000", "001", "002"}) {
    r = cli({"peel", "--mask", d + "mask.tif", "--raw", d + "raw_t" + f + ".tif", "--out", d + "peel_t" + f + ".tif"});
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out)["height"] == 40);
    r = cli({"segment2d", "--peel", d + "peel_t" + f + ".tif", "--h", "4", "--out", d + "seg_t" + f + ".tif",
             "--seeds-out", d + "seeds_t" + f + ".json"});
    REQUIRE(r.code == 0);
    CHECK(load_seeds(tmp / ("seeds_t" + f + ".json")).seeds.size() == json::parse(r.out)["seeds"].get<std::size_t>());
  }

  SUBCASE("seed edits from the command line") {
    const auto seeds = load_seeds(tmp / "seeds_t000.json");
    const auto gone = seeds.seeds.front().label;
    r = cli({"segment2d", "--peel", d + "peel_t000.tif", "--seeds", d + "seeds_t000.json", "--remove",
             std::to_string(gone), "--out", d + "edited.tif", "--seeds-out", d + "edited.json"});
    REQUIRE(r.code == 0);
    const auto edited = load_seeds(tmp / "edited.json");
    CHECK(edited.seeds.size() + 1 == seeds.seeds.size());
    const auto labels = load_labels(tmp / "edited.tif");
    CHECK(std::find(labels.data.begin(), labels.data.end(), gone) == labels.data.end());
  }

  SUBCASE("2D tracking and features") {
    r = cli({"track2d", "--labels", d + "seg_t%03d.tif", "--out", d + "t2.csv", "--no-filter"});
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out)["frames"] == 3);
    const auto t2 = load_tracks(tmp / "t2.csv");
    CHECK_NOTHROW(t2.validate());
    r = cli({"quantify", "--labels", d + "seg_t%03d.tif", "--peel", d + "peel_t%03d.tif", "--tracks", d + "t2.csv",
             "--features", "area,eccentricity,speed", "--frame-interval", "40", "--out", d + "f2.csv"});
    REQUIRE(r.code == 0);
    std::set<std::string> names;
    for (const auto& row : load_features(tmp / "f2.csv").rows) {
      names.insert(row.feature);
      if (row.feature == "area") CHECK(row.value > 0);
      if (row.feature == "eccentricity") CHECK((row.value >= 0 && row.value <= 1));
    }
    CHECK(names == std::set<std::string>{"area", "eccentricity", "speed"});
  }

  SUBCASE("3D tracking and features") {
    r = cli({"track3d", "--labels", d + "labels_t%03d.tif", "--out", d + "t3.csv"});
    REQUIRE(r.code == 0);
    const auto t3 = load_tracks(tmp / "t3.csv");
    std::size_t kept = 0;
    for (const auto& row : t3.rows) kept += row.status != TrackStatus::Discarded;
    CHECK(kept > 0);
    r = cli({"quantify", "--labels", d + "labels_t%03d.tif", "--tracks", d + "t3.csv", "--features", "volume",
             "--out", d + "f3.csv"});
    REQUIRE(r.code == 0);
    const auto f3 = load_features(tmp / "f3.csv");
    CHECK(f3.rows.size() == kept);
    for (const auto& row : f3.rows) CHECK(row.unit == "um^3");
  }

  SUBCASE("rectify with a furrow file") {
    save_furrow(FurrowLine{{{0, 30}, {39, 30}}}, tmp / "furrow.json");
    r = cli({"rectify", "--peel", d + "peel_t000.tif", "--furrow", d + "furrow.json", "--out", d + "rect.tif"});
    REQUIRE(r.code == 0);
    const auto a = load_peel(tmp / "peel_t000.tif"), b = load_peel(tmp / "rect.tif");
    CHECK(a.width == b.width);
    CHECK(a.height == b.height);
    for (std::size_t row = 0; row < a.height; ++row) {
      std::vector<double> x, y;
      for (std::size_t c = 0; c < a.row_length[row]; ++c) x.push_back(a.intensity[a.index(c, row)]);
      for (std::size_t c = 0; c < b.row_length[row]; ++c) y.push_back(b.intensity[b.index(c, row)]);
      std::sort(x.begin(), x.end());
      std::sort(y.begin(), y.end());
      CHECK(x == y);
    }
  }
}

TEST_CASE("command line errors are JSON on stderr") {
  auto r = cli({"mask", "--input", "x.tif"});
  CHECK(r.code == 2);
  CHECK(json::parse(r.err)["error"]["type"] == "usage");
  r = cli({"peel", "--mask", "/nonexistent/m.tif", "--raw", "/nonexistent/r.tif", "--out", "/tmp/x.tif"});
  CHECK(r.code == 1);
  const auto e = json::parse(r.err)["error"];
  CHECK(e["module"] == "volume-io");
  CHECK(e["type"] == "io");
  CHECK(r.out.empty());
  r = cli({"segment2d", "--peel", "p.tif", "--out", "o.tif", "--connectivity", "6"});
  CHECK(r.code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("HTTP session workflow") {
  testing::TempDir tmp("http");
  make_phantom(tmp / "data");
  const std::vector<fs::path> frames{tmp / "data" / "raw_t000.tif", tmp / "data" / "raw_t001.tif"};
  const auto work = tmp / "work";
  const auto annotations = load_annotations(tmp / "data" / "annotations.json");
  std::uint32_t removed = 0;
  std::uint64_t final_revision = 0;

  {
    Session session(work, frames);
    LiveServer srv(session);

    auto info = srv.get("/api/session");
    CHECK(info["revision"] == 0);
    CHECK(info["frames"] == 2);
    CHECK(info["dims"] == json::array({80, 40, 80}));
    CHECK(info["has_mask"] == false);

    auto slice = srv.client().Get("/api/slice/y/3?min=0&max=200");
    REQUIRE(slice);
    CHECK(slice->status == 200);
    CHECK(is_png(slice->body));
    srv.get("/api/slice/y/99", 404);

    // not built yet
    srv.get("/api/peel/0", 404);

    auto body = annotations_to_json(annotations);
    body.erase("revision");
    srv.send("PUT", "/api/annotations", body, 400);  // revision is required
    body["revision"] = 0;
    auto rev = srv.send("PUT", "/api/annotations", body)["revision"].get<std::uint64_t>();
    CHECK(rev == 1);
    auto got = srv.get("/api/annotations");
    CHECK(got["revision"] == 1);
    got.erase("revision");
    body.erase("revision");
    CHECK(got == body);

    SUBCASE("stale revisions are rejected without changing state") {
      auto stale = annotations_to_json(AnnotationSet{annotations.dims, {annotations.slices.front()}});
      stale["revision"] = 0;
      const auto j = srv.send("PUT", "/api/annotations", stale, 409);
      CHECK(j["revision"] == 1);
      CHECK(session.revision() == 1);
      CHECK(session.annotations()->slices.size() == annotations.slices.size());
    }

    SUBCASE("invalid polygons are rejected") {
      auto bad = annotations_to_json(annotations);
      bad["slices"][0]["outer"] = json::array({json::array({0, 0}), json::array({10, 10}), json::array({10, 0}),
                                               json::array({0, 10})});
      bad["revision"] = 1;
      srv.send("PUT", "/api/annotations", bad, 400);
      CHECK(session.revision() == 1);
    }

    rev = srv.send("POST", "/api/mask/build", {{"revision", rev}})["revision"];
    CHECK(srv.get("/api/session")["has_mask"] == true);
    const auto peels = srv.send("POST", "/api/peel/build", {{"surface", "apical"}, {"t", 5}, {"tol", 0.5}});
    rev = peels["revision"];
    REQUIRE(peels["peels"].size() == 2);
    CHECK(peels["peels"][0]["height"] == 40);
    CHECK(srv.get("/api/session")["peels"] == json::array({0, 1}));
    auto png = srv.client().Get("/api/peel/1");
    REQUIRE(png);
    CHECK(png->status == 200);
    CHECK(is_png(png->body));

    const auto preview = srv.send("POST", "/api/segment/0/preview", {{"h", 4}});
    REQUIRE(preview["labels"].size() >= 2);
    removed = preview["labels"][0];
    CHECK(preview["label_count"] == preview["labels"].size());

    // drop one seed, then check the preview no longer has its label
    auto seeds = srv.send("PUT", "/api/seeds/0", {{"revision", rev}, {"h", 4}, {"remove", {removed}}});
    rev = seeds["revision"];
    for (const auto& s : seeds["seeds"]) CHECK(s["label"] != removed);
    const auto after = srv.send("POST", "/api/segment/0/preview", {{"h", 4}});
    CHECK(after["label_count"].get<std::size_t>() + 1 == preview["label_count"].get<std::size_t>());
    for (const auto& l : after["labels"]) CHECK(l != removed);
    srv.send("PUT", "/api/seeds/0", {{"revision", rev - 1}, {"remove", json::array()}}, 409);
    srv.send("PUT", "/api/seeds/0", {{"revision", rev}, {"remove", {removed}}}, 400);

    rev = srv.send("PUT", "/api/furrow", {{"revision", rev}, {"points", {{0, 20}, {39, 25}}}})["revision"];
    CHECK(srv.get("/api/furrow")["points"].size() == 2);
    rev = srv.send("POST", "/api/rectify", {{"revision", rev}})["revision"];
    auto rect = srv.client().Get("/api/peel/0?rectified=1");
    REQUIRE(rect);
    CHECK(rect->status == 200);
    CHECK(session.peel(0, true)->width == session.peel(0)->width);

    srv.send("POST", "/api/segment/7/preview", json::object(), 404);
    auto junk = srv.client().Put("/api/furrow", "{not json", "application/json");
    REQUIRE(junk);
    CHECK(junk->status == 400);
    final_revision = session.revision();
  }

  // restarting on the same work directory resumes the committed state
  Session resumed(work);
  CHECK(resumed.revision() == final_revision);
  CHECK(resumed.frame_count() == 2);
  CHECK(resumed.annotations()->slices.size() == annotations.slices.size());
  const auto s = resumed.seeds(0);
  REQUIRE(s.has_value());
  for (const auto& seed : s->seeds) CHECK(seed.label != removed);
  CHECK(resumed.peel(1).has_value());
  CHECK(resumed.furrow()->points.size() == 2);
}

TEST_CASE("concurrent readers see a consistent revision") {
  testing::TempDir tmp("conc");
  make_phantom(tmp / "data", 1);
  Session session(tmp / "work", {tmp / "data" / "raw_t000.tif"});
  LiveServer srv(session);
  const auto body = annotations_to_json(load_annotations(tmp / "data" / "annotations.json"));
  std::atomic<bool> done = false;
  std::atomic<int> bad = 0;
  std::thread reader([&] {
    httplib::Client c("127.0.0.1", srv.client().port());
    std::uint64_t last = 0;
    while (!done) {
      auto res = c.Get("/api/session");
      if (!res || res->status != 200) {
        ++bad;
        continue;
      }
      const auto rev = json::parse(res->body)["revision"].get<std::uint64_t>();
      if (rev < last) ++bad;
      last = rev;
    }
  });
  for (std::uint64_t r = 0; r < 10; ++r) {
    auto b = body;
    b["revision"] = r;
    srv.send("PUT", "/api/annotations", b);
  }
  done = true;
  reader.join();
  CHECK(bad == 0);
  CHECK(session.revision() == 10);
}
