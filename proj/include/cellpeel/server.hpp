#pragma once

#include <memory>
#include <string>

#include "cellpeel/session.hpp"

namespace cellpeel {

/// HTTP/JSON front end of a Session.
///
///   GET  /api/session
///   GET  /api/slice/{x|y|z}/{index}?min=&max=&frame=      8-bit PNG
///   GET  /api/annotations            PUT /api/annotations
///   POST /api/mask/build             POST /api/peel/build {surface, t, tol}
///   GET  /api/peel/{frame}?min=&max=&rectified=            8-bit PNG
///   GET  /api/seeds/{frame}          PUT /api/seeds/{frame}
///   POST /api/segment/{frame}/preview {h}
///   GET  /api/furrow                 PUT /api/furrow
///   POST /api/rectify
///
/// PUT bodies must carry the `revision` they were based on; POST mutations
/// may. A stale revision is answered with 409 and the current revision.
class ApiServer {
 public:
  explicit ApiServer(Session& session);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Binds to `port`, or to a free port when `port` is 0; returns the port.
  int bind(const std::string& host, int port);
  /// Serves until `stop` is called.
  void run();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cellpeel
