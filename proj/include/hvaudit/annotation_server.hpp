#pragma once

#include <memory>
#include <string>
#include <thread>

#include "hvaudit/annotation.hpp"

namespace httplib {
class Server;
}

namespace hvaudit {

// HTTP front for an AnnotationStore. JSON request and response bodies.
//   GET  /api/taxonomy
//   GET  /api/tasks/next?annotator=ID
//   POST /api/annotations      {annotator, pref_id, label}
//   GET  /api/agreement
//   GET  /api/disagreements
//   POST /api/adjudications    {adjudicator, pref_id, label, note?}
//   GET  /api/export
// Errors come back as {error, message} with 400 (bad request / unknown
// label), 404 (unknown annotator) or 409 (not assigned / not in
// disagreement).
class AnnotationServer {
 public:
  explicit AnnotationServer(AnnotationStore& store);
  ~AnnotationServer();

  // Binds (port 0 picks a free port) and serves on a background thread.
  // Returns the bound port.
  int start(const std::string& host, int port);
  // Blocks serving on the calling thread.
  void listen(const std::string& host, int port);
  void stop();

 private:
  void routes();

  AnnotationStore& store_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace hvaudit
