#include "partsketch/gmm_json.hpp"

#include <fstream>
#include <sstream>

namespace partsketch {

using nlohmann::json;

namespace {

json vec_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from_json(const json& j, const char* field) {
  if (!j.is_array() || j.size() != 3) throw ShapeError(std::string(field) + ": expected 3 numbers");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw ShapeError(std::string(field) + ": expected 3 numbers");
    v[i] = j[i].get<double>();
  }
  return v;
}

Mat3 mat_from_json(const json& j, const char* field) {
  if (!j.is_array() || j.size() != 3) throw ShapeError(std::string(field) + ": expected 3x3");
  Mat3 m;
  for (int r = 0; r < 3; ++r) m.row(r) = vec_from_json(j[r], field).transpose();
  return m;
}

json mat_to_json(const Mat3& m) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back(json::array({m(r, 0), m(r, 1), m(r, 2)}));
  return rows;
}

std::vector<std::size_t> indices_from_json(const json& j) {
  if (!j.is_array()) throw EditError("edit: \"parts\" must be an array of indices");
  std::vector<std::size_t> out;
  for (const auto& v : j) {
    if (!v.is_number_integer() || v.get<long long>() < 0)
      throw EditError("edit: part indices must be non-negative integers");
    out.push_back(v.get<std::size_t>());
  }
  return out;
}

}  // namespace

json part_to_json(const GaussianPart& part) {
  return json{{"mu", vec_to_json(part.mu)},
              {"axes", mat_to_json(part.axes)},
              {"scales", vec_to_json(part.scales)},
              {"weight", part.weight}};
}

GaussianPart part_from_json(const json& j) {
  if (!j.is_object()) throw ShapeError("part: expected object");
  for (const char* f : {"mu", "axes", "scales", "weight"})
    if (!j.contains(f)) throw ShapeError(std::string("part: missing field \"") + f + "\"");
  GaussianPart p;
  p.mu = vec_from_json(j["mu"], "mu");
  p.axes = mat_from_json(j["axes"], "axes");
  p.scales = vec_from_json(j["scales"], "scales");
  if (!j["weight"].is_number()) throw ShapeError("weight: expected number");
  p.weight = j["weight"].get<double>();
  return p;
}

json tensor_to_json(const Tensor2& t) {
  json rows = json::array();
  for (std::size_t r = 0; r < t.rows(); ++r) {
    auto row = t.row(r);
    rows.push_back(json(std::vector<double>(row.begin(), row.end())));
  }
  return rows;
}

Tensor2 tensor_from_json(const json& j) {
  if (!j.is_array()) throw ShapeError("matrix: expected array of rows");
  if (j.empty()) return {};
  const std::size_t cols = j[0].size();
  Tensor2 t(j.size(), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw ShapeError("matrix: ragged rows");
    for (std::size_t c = 0; c < cols; ++c) t(r, c) = j[r][c].get<double>();
  }
  return t;
}

json shape_to_json(const ShapeGMM& shape) {
  json parts = json::array();
  for (const auto& p : shape.parts) parts.push_back(part_to_json(p));
  return json{{"version", kGmmJsonVersion}, {"parts", parts}, {"latents", tensor_to_json(shape.latents)}};
}

ShapeGMM shape_from_json(const json& j) {
  if (!j.is_object()) throw ShapeError("gmm: expected object");
  if (!j.contains("version") || j["version"] != kGmmJsonVersion)
    throw ShapeError("gmm: unsupported or missing version");
  if (!j.contains("parts") || !j["parts"].is_array()) throw ShapeError("gmm: missing parts");
  ShapeGMM s;
  for (std::size_t i = 0; i < j["parts"].size(); ++i) {
    try {
      s.parts.push_back(part_from_json(j["parts"][i]));
    } catch (const ShapeError& e) {
      throw ShapeError("gmm part " + std::to_string(i) + ": " + e.what());
    }
  }
  if (j.contains("latents")) s.latents = tensor_from_json(j["latents"]);
  validate(s);
  return s;
}

json edit_to_json(const EditOp& op) {
  json j{{"op", edit_name(op)}, {"parts", op.parts}};
  if (auto* t = std::get_if<edit::Translate>(&op.action)) j["delta"] = vec_to_json(t->delta);
  if (auto* r = std::get_if<edit::Rescale>(&op.action)) j["factors"] = vec_to_json(r->factors);
  if (auto* r = std::get_if<edit::Rotate>(&op.action)) j["rotation"] = mat_to_json(r->rotation);
  if (auto* r = std::get_if<edit::Restore>(&op.action)) {
    json tpl = json::array();
    for (const auto& p : r->templates) tpl.push_back(part_to_json(p));
    j["templates"] = tpl;
  }
  return j;
}

EditOp edit_from_json(const json& j) {
  if (!j.is_object() || !j.contains("op") || !j["op"].is_string())
    throw EditError("edit: expected object with string \"op\"");
  if (!j.contains("parts")) throw EditError("edit: missing \"parts\"");
  EditOp op;
  op.parts = indices_from_json(j["parts"]);
  const std::string name = j["op"];
  try {
    if (name == "translate") {
      op.action = edit::Translate{vec_from_json(j.at("delta"), "delta")};
    } else if (name == "rescale") {
      op.action = edit::Rescale{vec_from_json(j.at("factors"), "factors")};
    } else if (name == "rotate") {
      op.action = edit::Rotate{mat_from_json(j.at("rotation"), "rotation")};
    } else if (name == "delete") {
      op.action = edit::Delete{};
    } else if (name == "restore") {
      edit::Restore r;
      if (j.contains("templates"))
        for (const auto& p : j["templates"]) r.templates.push_back(part_from_json(p));
      op.action = std::move(r);
    } else {
      throw EditError("edit: unknown op \"" + name + "\"");
    }
  } catch (const ShapeError& e) {
    throw EditError(std::string("edit: ") + e.what());
  } catch (const json::exception& e) {
    throw EditError(std::string("edit: ") + e.what());
  }
  return op;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

ShapeGMM load_shape(const std::string& path) { return shape_from_json(json::parse(read_text_file(path))); }

void save_shape(const std::string& path, const ShapeGMM& shape) {
  write_text_file(path, shape_to_json(shape).dump(2) + "\n");
}

}  // namespace partsketch
