#include "partsketch/edit.hpp"

#include <set>
#include <string>

namespace partsketch {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_indices(const ShapeGMM& shape, const std::vector<std::size_t>& parts) {
  if (parts.empty()) throw EditError("edit selects no parts");
  std::set<std::size_t> seen;
  for (std::size_t i : parts) {
    if (i >= shape.parts.size())
      throw EditError("part index " + std::to_string(i) + " out of range [0, " +
                      std::to_string(shape.parts.size()) + ")");
    if (!seen.insert(i).second) throw EditError("part index " + std::to_string(i) + " repeated");
  }
}

void check_mean(const Vec3& mu, std::size_t i) {
  if (!mu.allFinite() || mu.cwiseAbs().maxCoeff() > kMeanBound)
    throw EditError("edit moves part " + std::to_string(i) + " outside [-1.5, 1.5]^3");
}

}  // namespace

ShapeGMM apply_edit(const ShapeGMM& shape, const EditOp& op) {
  check_indices(shape, op.parts);
  ShapeGMM out = shape;

  std::visit(
      overloaded{
          [&](const edit::Translate& t) {
            if (!t.delta.allFinite()) throw EditError("translate: non-finite delta");
            for (std::size_t i : op.parts) {
              out.parts[i].mu += t.delta;
              check_mean(out.parts[i].mu, i);
            }
          },
          [&](const edit::Rescale& r) {
            if (!r.factors.allFinite() || r.factors.minCoeff() <= 0.0)
              throw EditError("rescale: factors must be positive");
            for (std::size_t i : op.parts) out.parts[i].scales = out.parts[i].scales.cwiseProduct(r.factors);
          },
          [&](const edit::Rotate& r) {
            if (!is_rotation(r.rotation)) throw EditError("rotate: matrix is not a proper rotation");
            Vec3 centroid = Vec3::Zero();
            for (std::size_t i : op.parts) centroid += shape.parts[i].mu;
            centroid /= static_cast<double>(op.parts.size());
            for (std::size_t i : op.parts) {
              auto& p = out.parts[i];
              p.mu = centroid + r.rotation * (shape.parts[i].mu - centroid);
              p.axes = r.rotation * shape.parts[i].axes;
              check_mean(p.mu, i);
            }
          },
          [&](const edit::Delete&) {
            for (std::size_t i : op.parts) out.parts[i].weight = 0.0;
          },
          [&](const edit::Restore& r) {
            if (r.templates.size() != op.parts.size())
              throw EditError("restore: " + std::to_string(r.templates.size()) + " templates for " +
                              std::to_string(op.parts.size()) + " parts");
            for (std::size_t k = 0; k < op.parts.size(); ++k) {
              try {
                validate_part(r.templates[k], op.parts[k]);
              } catch (const ShapeError& e) {
                throw EditError(std::string("restore: invalid template: ") + e.what());
              }
              out.parts[op.parts[k]] = r.templates[k];
            }
          },
      },
      op.action);
  return out;
}

const char* edit_name(const EditOp& op) {
  return std::visit(overloaded{
                        [](const edit::Translate&) { return "translate"; },
                        [](const edit::Rescale&) { return "rescale"; },
                        [](const edit::Rotate&) { return "rotate"; },
                        [](const edit::Delete&) { return "delete"; },
                        [](const edit::Restore&) { return "restore"; },
                    },
                    op.action);
}

}  // namespace partsketch
