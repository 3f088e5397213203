#include "partsketch/service.hpp"

#include <cstdio>

#include "httplib.h"
#include "partsketch/adjacency.hpp"
#include "partsketch/gmm_json.hpp"
#include "partsketch/mesh.hpp"
#include "partsketch/raster.hpp"
#include "partsketch/training.hpp"

namespace partsketch {

using nlohmann::json;

void sync_latents(ShapeGMM& shape, const std::vector<std::size_t>& parts) {
  if (shape.latents.rows() != shape.parts.size() || shape.latents.cols() < kThetaWidth) return;
  LatentCodec codec(shape.latents.cols());
  ShapeGMM touched;
  for (std::size_t i : parts) touched.parts.push_back(shape.parts[i]);
  const Tensor2 z = codec.latent_of(touched);
  for (std::size_t k = 0; k < parts.size(); ++k)
    for (std::size_t c = 0; c < z.cols(); ++c) shape.latents(parts[k], c) = z(k, c);
}

ShapeGMM replay(const ShapeGMM& initial, const std::vector<EditOp>& history) {
  ShapeGMM s = initial;
  for (const auto& op : history) {
    s = apply_edit(s, op);
    sync_latents(s, op.parts);
  }
  return s;
}

Service::Service(ServiceOptions opt) : opt_(std::move(opt)) {}

Service::Service(Model model, ServiceOptions opt) : opt_(std::move(opt)) { load_model(std::move(model)); }

void Service::load_model(Model model) {
  hash_ = partsketch::checkpoint_hash(model);
  model_ = std::move(model);
}

Response Service::error(int status, const std::string& message) const {
  json j{{"error", message}, {"status", status}};
  j["checkpoint"] = hash_.empty() ? json(nullptr) : json(hash_);
  return {status, j.dump(), "application/json"};
}

std::string Service::create_session(const ShapeGMM& shape) {
  validate(shape);
  auto s = std::make_shared<Session>();
  s->initial = shape;
  s->current = shape;
  s->checkpoint = hash_;
  std::lock_guard lock(sessions_mu_);
  char buf[24];
  std::snprintf(buf, sizeof buf, "s%06llu", static_cast<unsigned long long>(next_id_++));
  s->id = buf;
  sessions_[s->id] = s;
  return s->id;
}

std::shared_ptr<Session> Service::find(const std::string& id) const {
  std::lock_guard lock(sessions_mu_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::size_t Service::session_count() const {
  std::lock_guard lock(sessions_mu_);
  return sessions_.size();
}

std::string Service::mesh_obj(const ShapeGMM& shape) const {
  auto m = extract_mesh(shape, opt_.mesh_resolution);
  return m ? to_obj(*m) : std::string();
}

json Service::session_json(const Session& s) const {
  return {{"session", s.id},
          {"version", s.history.size()},
          {"gmm", shape_to_json(s.current)},
          {"checkpoint", hash_.empty() ? json(nullptr) : json(hash_)}};
}

Response Service::healthz() const {
  json j{{"status", "ok"}, {"model_loaded", has_model()}, {"sessions", session_count()}};
  j["checkpoint"] = hash_.empty() ? json(nullptr) : json(hash_);
  return {200, j.dump()};
}

Response Service::generate(const std::string& png, const std::optional<std::string>& desc_json) {
  if (!model_) return error(409, "no checkpoint loaded");
  SketchRaster sketch;
  try {
    sketch = decode_png(png);
  } catch (const ImageSizeError& e) {
    return error(422, e.what());
  } catch (const ImageError& e) {
    return error(400, e.what());
  }
  if (sketch.side != model_->config.sketch_side)
    return error(422, "sketch must be " + std::to_string(model_->config.sketch_side) + "x" +
                          std::to_string(model_->config.sketch_side) + ", got " + std::to_string(sketch.side) + "x" +
                          std::to_string(sketch.side));
  std::optional<PartDescription> desc;
  if (desc_json && !desc_json->empty()) {
    try {
      desc = desc_from_json(json::parse(*desc_json));
    } catch (const std::exception& e) {
      return error(400, std::string("desc: ") + e.what());
    }
  }
  const ShapeGMM shape = predict_shape(*model_, sketch, desc);
  auto s = find(create_session(shape));
  json j = session_json(*s);
  j["mesh"] = mesh_obj(s->current);
  return {200, j.dump()};
}

Response Service::gmm(const std::string& id) const {
  auto s = find(id);
  if (!s) return error(404, "unknown session " + id);
  std::lock_guard lock(s->writer);
  return {200, session_json(*s).dump()};
}

Response Service::mesh(const std::string& id) const {
  auto s = find(id);
  if (!s) return error(404, "unknown session " + id);
  ShapeGMM shape;
  {
    std::lock_guard lock(s->writer);
    shape = s->current;
  }
  return {200, mesh_obj(shape), "text/plain"};
}

Response Service::edit(const std::string& id, const std::string& body) {
  auto s = find(id);
  if (!s) return error(404, "unknown session " + id);
  std::unique_lock lock(s->writer, std::try_to_lock);
  if (!lock.owns_lock()) return error(409, "another edit on session " + id + " is in progress");
  EditOp op;
  try {
    const json j = json::parse(body);
    if (j.contains("expected_version") && j["expected_version"].get<std::size_t>() != s->history.size())
      return error(409, "session " + id + " is at version " + std::to_string(s->history.size()) + ", edit expected " +
                            std::to_string(j["expected_version"].get<std::size_t>()));
    op = edit_from_json(j);
    // Restore without templates brings back the generated parts.
    if (auto* r = std::get_if<edit::Restore>(&op.action); r && r->templates.empty()) {
      for (std::size_t i : op.parts) {
        if (i >= s->initial.parts.size()) throw EditError("restore: part index " + std::to_string(i) + " out of range");
        GaussianPart p = s->initial.parts[i];
        if (p.weight == 0.0) p.weight = 1.0;
        r->templates.push_back(p);
      }
    }
    ShapeGMM next = apply_edit(s->current, op);
    sync_latents(next, op.parts);
    s->history.push_back(op);
    s->current = std::move(next);
  } catch (const json::exception& e) {
    return error(422, std::string("edit: ") + e.what());
  } catch (const EditError& e) {
    return error(422, e.what());
  } catch (const ShapeError& e) {
    return error(422, e.what());
  }
  json j = session_json(*s);
  lock.unlock();
  j["mesh"] = mesh_obj(ShapeGMM(s->current));
  return {200, j.dump()};
}

Response Service::undo(const std::string& id) {
  auto s = find(id);
  if (!s) return error(404, "unknown session " + id);
  std::unique_lock lock(s->writer, std::try_to_lock);
  if (!lock.owns_lock()) return error(409, "another edit on session " + id + " is in progress");
  if (s->history.empty()) return error(409, "nothing to undo");
  s->history.pop_back();
  s->current = replay(s->initial, s->history);
  json j = session_json(*s);
  lock.unlock();
  j["mesh"] = mesh_obj(ShapeGMM(s->current));
  return {200, j.dump()};
}

Response Service::clusters(const std::string& id) const {
  auto s = find(id);
  if (!s) return error(404, "unknown session " + id);
  std::vector<Vec3> means;
  {
    std::lock_guard lock(s->writer);
    means = all_means(s->current);
  }
  const std::size_t k = std::min<std::size_t>(model_ ? model_->config.clusters : 4, means.size());
  try {
    const Tensor2 adj = pseudo_adjacency(means);
    const Dendrogram d = build_dendrogram(adj);
    json j{{"session", id},
           {"dendrogram", dendrogram_to_json(d)},
           {"assignment", assignment_to_json(d.cut(k))}};
    j["checkpoint"] = hash_.empty() ? json(nullptr) : json(hash_);
    return {200, j.dump()};
  } catch (const DegenerateInputError& e) {
    return error(409, e.what());
  }
}

Response Service::remove(const std::string& id) {
  std::lock_guard lock(sessions_mu_);
  if (!sessions_.erase(id)) return error(404, "unknown session " + id);
  json j{{"deleted", id}};
  j["checkpoint"] = hash_.empty() ? json(nullptr) : json(hash_);
  return {200, j.dump()};
}

json Service::snapshot() const {
  std::lock_guard lock(sessions_mu_);
  json list = json::array();
  for (const auto& [id, s] : sessions_) {
    std::lock_guard w(s->writer);
    json hist = json::array();
    for (const auto& op : s->history) hist.push_back(edit_to_json(op));
    list.push_back({{"id", id}, {"initial", shape_to_json(s->initial)}, {"history", hist}, {"checkpoint", s->checkpoint}});
  }
  return {{"version", 1}, {"next_id", next_id_}, {"sessions", list}};
}

void Service::restore_snapshot(const json& j) {
  std::lock_guard lock(sessions_mu_);
  for (const auto& e : j.at("sessions")) {
    auto s = std::make_shared<Session>();
    s->id = e.at("id").get<std::string>();
    s->initial = shape_from_json(e.at("initial"));
    s->checkpoint = e.value("checkpoint", std::string());
    for (const auto& op : e.at("history")) s->history.push_back(edit_from_json(op));
    s->current = replay(s->initial, s->history);
    sessions_[s->id] = s;
  }
  next_id_ = std::max(next_id_, j.value("next_id", std::uint64_t{1}));
}

void Service::save_snapshot() const {
  if (opt_.snapshot_path) write_text_file(*opt_.snapshot_path, snapshot().dump(2) + "\n");
}

namespace {

void reply(httplib::Response& res, const Response& r, const std::string& hash) {
  res.status = r.status;
  if (!hash.empty()) res.set_header("X-Checkpoint-Hash", hash);
  res.set_content(r.body, r.content_type);
}

}  // namespace

std::unique_ptr<httplib::Server> make_http_server(Service& svc) {
  auto server = std::make_unique<httplib::Server>();
  auto& s = *server;
  s.Get("/healthz", [&svc](const httplib::Request&, httplib::Response& res) {
    reply(res, svc.healthz(), svc.checkpoint_hash());
  });
  s.Post("/generate", [&svc](const httplib::Request& req, httplib::Response& res) {
    std::string png;
    if (req.has_file("sketch")) png = req.get_file_value("sketch").content;
    else if (req.has_file("image")) png = req.get_file_value("image").content;
    else if (!req.is_multipart_form_data()) png = req.body;
    std::optional<std::string> desc;
    if (req.has_file("desc")) desc = req.get_file_value("desc").content;
    reply(res, svc.generate(png, desc), svc.checkpoint_hash());
  });
  s.Get(R"(/session/([^/]+)/gmm)", [&svc](const httplib::Request& req, httplib::Response& res) {
    reply(res, svc.gmm(req.matches[1]), svc.checkpoint_hash());
  });
  s.Get(R"(/session/([^/]+)/mesh)", [&svc](const httplib::Request& req, httplib::Response& res) {
    reply(res, svc.mesh(req.matches[1]), svc.checkpoint_hash());
  });
  s.Post(R"(/session/([^/]+)/edit)", [&svc](const httplib::Request& req, httplib::Response& res) {
    reply(res, svc.edit(req.matches[1], req.body), svc.checkpoint_hash());
  });
  s.Post(R"(/session/([^/]+)/undo)", [&svc](const httplib::Request& req, httplib::Response& res) {
    reply(res, svc.undo(req.matches[1]), svc.checkpoint_hash());
  });
  s.Get(R"(/session/([^/]+)/clusters)", [&svc](const httplib::Request& req, httplib::Response& res) {
    reply(res, svc.clusters(req.matches[1]), svc.checkpoint_hash());
  });
  s.Delete(R"(/session/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    reply(res, svc.remove(req.matches[1]), svc.checkpoint_hash());
  });
  return server;
}

}  // namespace partsketch
