#pragma once

// GMM JSON schema, version 1:
//   {"version": 1,
//    "parts": [{"mu": [x,y,z], "axes": [[r0],[r1],[r2]], "scales": [a,b,c], "weight": w}, ...],
//    "latents": [[...], ...]}
// `axes` is row-major; its columns are the principal directions.
//
// Edit JSON: {"op": "translate"|"rescale"|"rotate"|"delete"|"restore", "parts": [i, ...],
//             "delta"|"factors"|"rotation"|"templates": ...}

#include <string>

#include "json.hpp"
#include "partsketch/edit.hpp"
#include "partsketch/gmm_shape.hpp"

namespace partsketch {

inline constexpr int kGmmJsonVersion = 1;

nlohmann::json part_to_json(const GaussianPart& part);
GaussianPart part_from_json(const nlohmann::json& j);

nlohmann::json shape_to_json(const ShapeGMM& shape);
// Validates the result; throws ShapeError on schema or invariant violations.
ShapeGMM shape_from_json(const nlohmann::json& j);

nlohmann::json tensor_to_json(const Tensor2& t);
Tensor2 tensor_from_json(const nlohmann::json& j);

nlohmann::json edit_to_json(const EditOp& op);
// Throws EditError on malformed input. Restore ops may omit templates; the
// returned op then carries an empty template list.
EditOp edit_from_json(const nlohmann::json& j);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);
ShapeGMM load_shape(const std::string& path);
void save_shape(const std::string& path, const ShapeGMM& shape);

}  // namespace partsketch
