#include "partsketch/gmm_shape.hpp"

#include <cmath>
#include <string>

namespace partsketch {

Mat3 GaussianPart::covariance() const {
  return axes * scales.cwiseProduct(scales).asDiagonal() * axes.transpose();
}

bool is_rotation(const Mat3& r, double tol) {
  if (!r.allFinite()) return false;
  if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(r.determinant() - 1.0) <= tol * 10.0;
}

void validate_part(const GaussianPart& part, std::size_t index) {
  const std::string where = "part " + std::to_string(index) + ": ";
  if (!part.mu.allFinite() || !part.scales.allFinite() || !std::isfinite(part.weight))
    throw ShapeError(where + "non-finite value");
  if (part.mu.cwiseAbs().maxCoeff() > kMeanBound)
    throw ShapeError(where + "mean outside [-1.5, 1.5]^3");
  if (!is_rotation(part.axes)) throw ShapeError(where + "axes are not a proper rotation");
  if (part.scales.minCoeff() <= 0.0) throw ShapeError(where + "scales must be positive");
  if (part.weight < 0.0 || part.weight > 1.0) throw ShapeError(where + "weight outside [0, 1]");
}

void validate(const ShapeGMM& shape) {
  if (shape.parts.empty()) throw ShapeError("shape has no parts");
  for (std::size_t i = 0; i < shape.parts.size(); ++i) validate_part(shape.parts[i], i);
  if (!shape.latents.empty() && shape.latents.rows() != shape.parts.size())
    throw ShapeError("latent rows " + std::to_string(shape.latents.rows()) + " != part count " +
                     std::to_string(shape.parts.size()));
}

kernels::PreparedPart prepare(const GaussianPart& part) {
  kernels::PreparedPart p;
  for (int i = 0; i < 3; ++i) p.mu[i] = part.mu[i];
  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < 3; ++i) p.whiten[k][i] = part.axes(i, k) / part.scales[k];
  p.weight = part.weight;
  return p;
}

std::vector<kernels::PreparedPart> prepare(const ShapeGMM& shape) {
  std::vector<kernels::PreparedPart> out;
  out.reserve(shape.parts.size());
  for (const auto& part : shape.parts) out.push_back(prepare(part));
  return out;
}

double part_occupancy(const GaussianPart& part, const Vec3& p) {
  const auto prepared = prepare(part);
  return kernels::occupancy_at({&prepared, 1}, {p.x(), p.y(), p.z()});
}

double occupancy(const ShapeGMM& shape, const Vec3& p) {
  const auto prepared = prepare(shape);
  return kernels::occupancy_at(prepared, {p.x(), p.y(), p.z()});
}

double voxel_volume(const ShapeGMM& shape, std::size_t cells, double iso) {
  // Cell-centred samples so each voxel is counted once.
  kernels::GridSpec grid;
  const double h = (grid.hi - grid.lo) / static_cast<double>(cells);
  grid.lo += 0.5 * h;
  grid.hi -= 0.5 * h;
  grid.cells = cells - 1;
  std::vector<double> values(grid.samples() * grid.samples() * grid.samples());
  kernels::occupancy_grid(prepare(shape), grid, values);
  std::size_t inside = 0;
  for (double v : values) inside += v >= iso ? 1 : 0;
  return static_cast<double>(inside) * h * h * h;
}

std::vector<Vec3> active_means(const ShapeGMM& shape) {
  std::vector<Vec3> out;
  for (const auto& p : shape.parts)
    if (p.active()) out.push_back(p.mu);
  return out;
}

std::vector<Vec3> all_means(const ShapeGMM& shape) {
  std::vector<Vec3> out;
  out.reserve(shape.parts.size());
  for (const auto& p : shape.parts) out.push_back(p.mu);
  return out;
}

}  // namespace partsketch
