#include "cellpeel/server.hpp"

#include <algorithm>
#include <map>

#include <httplib.h>

#include "cellpeel/cli.hpp"
#include "cellpeel/formats.hpp"
#include "cellpeel/png_encode.hpp"

namespace cellpeel {

using json = nlohmann::json;

namespace {

int status_for(const std::exception& e) {
  if (dynamic_cast<const ConflictError*>(&e)) return 409;
  if (dynamic_cast<const NotFoundError*>(&e)) return 404;
  if (dynamic_cast<const InvalidArgument*>(&e) || dynamic_cast<const FormatError*>(&e)) return 400;
  if (dynamic_cast<const ComputeError*>(&e)) return 422;
  return 500;
}

void send_json(httplib::Response& res, const json& j, int status = 200) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    auto j = json::parse(req.body);
    if (!j.is_object()) throw FormatError("pipeline-cli", "request body must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw FormatError("pipeline-cli", std::string("request body is not valid JSON: ") + e.what());
  }
}

std::optional<std::uint64_t> body_revision(const json& body, bool required) {
  if (body.contains("revision") && !body["revision"].is_null()) {
    if (!body["revision"].is_number_unsigned()) throw FormatError("pipeline-cli", "revision must be a non-negative integer");
    return body["revision"].get<std::uint64_t>();
  }
  if (required) throw InvalidArgument("pipeline-cli", "mutation needs the revision it was based on");
  return std::nullopt;
}

std::size_t path_number(const httplib::Request& req, std::size_t group) {
  return static_cast<std::size_t>(std::stoull(req.matches[group].str()));
}

std::optional<double> query_number(const httplib::Request& req, const char* key) {
  if (!req.has_param(key)) return std::nullopt;
  const auto v = req.get_param_value(key);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw InvalidArgument("pipeline-cli", std::string("query parameter ") + key + " must be a number");
  }
}

void send_png(httplib::Response& res, const std::vector<double>& values, std::size_t w, std::size_t h,
              const httplib::Request& req) {
  double lo = 0, hi = 0;
  if (!values.empty()) {
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    lo = *mn;
    hi = *mx;
  }
  lo = query_number(req, "min").value_or(lo);
  hi = query_number(req, "max").value_or(hi);
  res.set_content(encode_png_gray8(window_to_8bit(values, lo, hi), w, h), "image/png");
}

json seeds_payload(const std::optional<SeedSet>& s, std::uint64_t revision) {
  json j = s ? seeds_to_json(*s) : json{{"seeds", json::array()}, {"next_label", 1}};
  j["revision"] = revision;
  return j;
}

SegParams seg_params_from(const json& body) {
  SegParams p;
  p.h = body.value("h", p.h);
  p.connectivity = body.value("connectivity", p.connectivity);
  p.invert = body.value("invert", p.invert);
  p.validate();
  return p;
}

}  // namespace

struct ApiServer::Impl {
  Session& session;
  httplib::Server server;

  explicit Impl(Session& s) : session(s) { routes(); }

  template <typename Fn>
  httplib::Server::Handler guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const ConflictError& e) {
        auto j = error_json(e);
        j["revision"] = e.current();
        send_json(res, j, 409);
      } catch (const std::exception& e) {
        send_json(res, error_json(e), status_for(e));
      }
    };
  }

  void routes() {
    auto& s = session;
    server.Get("/api/session", guarded([&s](const auto&, auto& res) { send_json(res, s.info()); }));

    server.Get(R"(/api/slice/([xyz])/(\d+))", guarded([&s](const httplib::Request& req, httplib::Response& res) {
                 const char axis = req.matches[1].str()[0];
                 const std::size_t index = path_number(req, 2);
                 const auto frame = static_cast<std::size_t>(query_number(req, "frame").value_or(0));
                 const auto vol = s.raw(frame);
                 const auto& d = vol->dims();
                 const std::size_t limit = axis == 'x' ? d.nx : axis == 'y' ? d.ny : d.nz;
                 if (index >= limit) throw NotFoundError("slice index out of range");
                 std::size_t w = 0, h = 0;
                 std::vector<double> v;
                 if (axis == 'y') {  // xz cross-section, the annotation view
                   w = d.nx;
                   h = d.nz;
                   for (std::size_t z = 0; z < d.nz; ++z)
                     for (std::size_t x = 0; x < d.nx; ++x) v.push_back(vol->at(x, index, z));
                 } else if (axis == 'x') {
                   w = d.ny;
                   h = d.nz;
                   for (std::size_t z = 0; z < d.nz; ++z)
                     for (std::size_t y = 0; y < d.ny; ++y) v.push_back(vol->at(index, y, z));
                 } else {
                   w = d.nx;
                   h = d.ny;
                   for (std::size_t y = 0; y < d.ny; ++y)
                     for (std::size_t x = 0; x < d.nx; ++x) v.push_back(vol->at(x, y, index));
                 }
                 send_png(res, v, w, h, req);
               }));

    server.Get("/api/annotations", guarded([&s](const auto&, auto& res) {
                 const auto rev = s.revision();
                 auto set = s.annotations();
                 if (!set) {
                   set = AnnotationSet{};
                   set->dims = s.raw(0)->dims();
                 }
                 auto j = annotations_to_json(*set);
                 j["revision"] = rev;
                 send_json(res, j);
               }));
    server.Put("/api/annotations", guarded([&s](const httplib::Request& req, auto& res) {
                 const auto body = parse_body(req);
                 const auto expected = body_revision(body, true);
                 send_json(res, {{"revision", s.put_annotations(annotations_from_json(body), expected)}});
               }));

    server.Post("/api/mask/build", guarded([&s](const httplib::Request& req, auto& res) {
                  const auto body = parse_body(req);
                  send_json(res, {{"revision", s.build_mask(body_revision(body, false))}});
                }));

    server.Post("/api/peel/build", guarded([&s](const httplib::Request& req, auto& res) {
                  const auto body = parse_body(req);
                  ShellParams p;
                  p.t = body.value("t", p.t);
                  p.tol = body.value("tol", p.tol);
                  const auto surface = surface_from_string(body.value("surface", std::string("apical")));
                  const auto rev = s.build_peels(surface, p, body_revision(body, false));
                  json peels = json::array();
                  for (std::size_t f = 0; f < s.frame_count(); ++f) {
                    const auto pe = s.peel(f);
                    if (pe) peels.push_back({{"frame", f}, {"width", pe->width}, {"height", pe->height}});
                  }
                  send_json(res, {{"revision", rev}, {"peels", peels}});
                }));

    server.Get(R"(/api/peel/(\d+))", guarded([&s](const httplib::Request& req, httplib::Response& res) {
                 const bool rectified = req.has_param("rectified") && req.get_param_value("rectified") != "0";
                 const auto pe = s.peel(path_number(req, 1), rectified);
                 if (!pe) throw NotFoundError("peel has not been built");
                 send_png(res, pe->intensity, pe->width, pe->height, req);
               }));

    server.Get(R"(/api/seeds/(\d+))", guarded([&s](const httplib::Request& req, auto& res) {
                 const auto rev = s.revision();
                 send_json(res, seeds_payload(s.seeds(path_number(req, 1)), rev));
               }));
    server.Put(R"(/api/seeds/(\d+))", guarded([&s](const httplib::Request& req, auto& res) {
                 const auto frame = path_number(req, 1);
                 const auto body = parse_body(req);
                 const auto expected = body_revision(body, true);
                 SeedSet next;
                 if (body.contains("seeds")) {
                   next = seeds_from_json(body);
                 } else {
                   const auto pe = s.peel(frame);
                   if (!pe) throw NotFoundError("peel has not been built");
                   auto base = s.seeds(frame);
                   if (!base) base = segment_peel(*pe, seg_params_from(body)).seeds;
                   std::vector<std::array<std::size_t, 2>> add;
                   std::vector<std::uint32_t> remove;
                   try {
                     for (const auto& a : body.value("add", json::array()))
                       add.push_back({a.at(0).get<std::size_t>(), a.at(1).get<std::size_t>()});
                     for (const auto& l : body.value("remove", json::array())) remove.push_back(l.get<std::uint32_t>());
                   } catch (const json::exception& e) {
                     throw FormatError("segment2d", std::string("bad seed edit: ") + e.what());
                   }
                   next = edit_seeds(*base, add, remove, pe->width, pe->height);
                 }
                 const auto rev = s.put_seeds(frame, next, expected);
                 send_json(res, seeds_payload(next, rev));
               }));

    server.Post(R"(/api/segment/(\d+)/preview)", guarded([&s](const httplib::Request& req, auto& res) {
                  const auto frame = path_number(req, 1);
                  const auto params = seg_params_from(parse_body(req));
                  const auto seg = s.preview(frame, params);
                  std::map<std::uint32_t, json> by_label;
                  for (const auto& [r, c] : label_boundaries(seg.labels))
                    by_label[seg.labels.at(c, r)].push_back({r, c});
                  json labels = json::array(), boundaries = json::array();
                  for (const auto& seed : seg.seeds.seeds) labels.push_back(seed.label);
                  std::sort(labels.begin(), labels.end());
                  for (auto& [l, px] : by_label) boundaries.push_back({{"label", l}, {"pixels", std::move(px)}});
                  send_json(res, {{"frame", frame},
                                  {"h", params.h},
                                  {"label_count", labels.size()},
                                  {"labels", labels},
                                  {"seeds", seeds_to_json(seg.seeds)},
                                  {"boundaries", boundaries}});
                }));

    server.Get("/api/furrow", guarded([&s](const auto&, auto& res) {
                 const auto rev = s.revision();
                 const auto f = s.furrow();
                 json j = f ? furrow_to_json(*f) : json{{"points", json::array()}};
                 j["revision"] = rev;
                 send_json(res, j);
               }));
    server.Put("/api/furrow", guarded([&s](const httplib::Request& req, auto& res) {
                 const auto body = parse_body(req);
                 const auto expected = body_revision(body, true);
                 send_json(res, {{"revision", s.put_furrow(furrow_from_json(body), expected)}});
               }));

    server.Post("/api/rectify", guarded([&s](const httplib::Request& req, auto& res) {
                  const auto body = parse_body(req);
                  send_json(res, {{"revision", s.rectify_peels(body_revision(body, false))}});
                }));
  }
};

ApiServer::ApiServer(Session& session) : impl_(std::make_unique<Impl>(session)) {}
ApiServer::~ApiServer() { stop(); }

int ApiServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = impl_->server.bind_to_any_port(host);
    if (p <= 0) throw IoError("pipeline-cli", "cannot bind to " + host);
    return p;
  }
  if (!impl_->server.bind_to_port(host, port)) throw IoError("pipeline-cli", "port " + std::to_string(port) + " is not free");
  return port;
}

void ApiServer::run() { impl_->server.listen_after_bind(); }
void ApiServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}
void ApiServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace cellpeel
