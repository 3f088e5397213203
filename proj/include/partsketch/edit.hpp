#pragma once

#include <stdexcept>
#include <variant>
#include <vector>

#include "partsketch/gmm_shape.hpp"

namespace partsketch {

class EditError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace edit {

struct Translate {
  Vec3 delta = Vec3::Zero();
};
// Per-axis radius factors in each part's own frame.
struct Rescale {
  Vec3 factors = Vec3::Ones();
};
// Rotates the selected parts about their common centroid.
struct Rotate {
  Mat3 rotation = Mat3::Identity();
};
struct Delete {};
// Re-activates parts from templates, one per selected index.
struct Restore {
  std::vector<GaussianPart> templates;
};

}  // namespace edit

using EditAction = std::variant<edit::Translate, edit::Rescale, edit::Rotate, edit::Delete, edit::Restore>;

struct EditOp {
  std::vector<std::size_t> parts;
  EditAction action;
};

// Returns a new shape; parts not listed in op.parts are copied unchanged.
// Latent rows are left as they are; callers that keep latents in sync
// re-encode the touched rows.
ShapeGMM apply_edit(const ShapeGMM& shape, const EditOp& op);

const char* edit_name(const EditOp& op);

}  // namespace partsketch
