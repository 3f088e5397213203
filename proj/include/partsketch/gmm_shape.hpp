#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "partsketch/kernels.hpp"
#include "partsketch/tensor.hpp"

namespace partsketch {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr std::size_t kDefaultPartCount = 16;
inline constexpr double kMeanBound = 1.5;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// One anisotropic Gaussian. Columns of `axes` are the principal directions;
// covariance = axes * diag(scales^2) * axes^T. weight == 0 marks a deleted part.
struct GaussianPart {
  Vec3 mu = Vec3::Zero();
  Mat3 axes = Mat3::Identity();
  Vec3 scales = Vec3::Constant(0.1);
  double weight = 1.0;

  Mat3 covariance() const;
  bool active() const { return weight > 0.0; }
};

struct ShapeGMM {
  std::vector<GaussianPart> parts;
  Tensor2 latents;  // parts.size() x latent width; may be empty

  std::size_t size() const { return parts.size(); }
};

// Throws ShapeError naming the first violated invariant.
void validate_part(const GaussianPart& part, std::size_t index);
void validate(const ShapeGMM& shape);

kernels::PreparedPart prepare(const GaussianPart& part);
std::vector<kernels::PreparedPart> prepare(const ShapeGMM& shape);

// Single-part density weight * exp(-0.5 * Mahalanobis^2), zero beyond the
// support radius.
double part_occupancy(const GaussianPart& part, const Vec3& p);

// Max-union of active parts; in [0, 1].
double occupancy(const ShapeGMM& shape, const Vec3& p);

// Voxel-count estimate of the region occupancy >= iso inside the grid.
double voxel_volume(const ShapeGMM& shape, std::size_t cells = 64, double iso = 0.5);

std::vector<Vec3> active_means(const ShapeGMM& shape);
std::vector<Vec3> all_means(const ShapeGMM& shape);

bool is_rotation(const Mat3& r, double tol = 1e-9);

}  // namespace partsketch
