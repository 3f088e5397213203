#pragma once

// Session store and HTTP front end for generation and interactive editing.

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "partsketch/edit.hpp"
#include "partsketch/model.hpp"

namespace httplib {
class Server;
}

namespace partsketch {

struct Session {
  std::string id;
  ShapeGMM initial;
  std::vector<EditOp> history;
  ShapeGMM current;
  std::string checkpoint;  // hash of the model that generated it
  std::mutex writer;       // held for the duration of one edit
};

// Re-encodes the latent rows of the listed parts; no-op for shapes without latents.
void sync_latents(ShapeGMM& shape, const std::vector<std::size_t>& parts);
// Applies the history to the initial shape, keeping latents in sync.
ShapeGMM replay(const ShapeGMM& initial, const std::vector<EditOp>& history);

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

struct ServiceOptions {
  std::size_t mesh_resolution = 48;
  std::optional<std::string> snapshot_path;  // sessions persisted here on shutdown
};

class Service {
 public:
  explicit Service(ServiceOptions opt = {});
  Service(Model model, ServiceOptions opt = {});

  void load_model(Model model);
  bool has_model() const { return model_.has_value(); }
  const std::string& checkpoint_hash() const { return hash_; }

  // Adds a session for an existing shape (used by the CLI and tests).
  std::string create_session(const ShapeGMM& shape);
  std::shared_ptr<Session> find(const std::string& id) const;
  std::size_t session_count() const;

  Response healthz() const;
  Response generate(const std::string& png, const std::optional<std::string>& desc_json);
  Response gmm(const std::string& id) const;
  Response mesh(const std::string& id) const;
  // Body is edit JSON, optionally carrying "expected_version" (history length
  // the client last saw); a mismatch is a conflict.
  Response edit(const std::string& id, const std::string& body);
  Response undo(const std::string& id);
  Response clusters(const std::string& id) const;
  Response remove(const std::string& id);

  nlohmann::json snapshot() const;
  void restore_snapshot(const nlohmann::json& j);
  void save_snapshot() const;

 private:
  Response error(int status, const std::string& message) const;
  nlohmann::json session_json(const Session& s) const;
  std::string mesh_obj(const ShapeGMM& shape) const;

  ServiceOptions opt_;
  std::optional<Model> model_;
  std::string hash_;
  mutable std::mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;
};

// Routes: POST /generate, GET /session/{id}/gmm, GET /session/{id}/mesh,
// POST /session/{id}/edit, POST /session/{id}/undo, GET /session/{id}/clusters,
// DELETE /session/{id}, GET /healthz.
std::unique_ptr<httplib::Server> make_http_server(Service& service);

}  // namespace partsketch
