#pragma once

// Hand-built layouts shared by several test files.

#include <cmath>

#include "partsketch/gmm_shape.hpp"

namespace partsketch::testing {

inline GaussianPart sphere_part(const Vec3& mu, double s, double weight = 1.0) {
  GaussianPart p;
  p.mu = mu;
  p.scales = Vec3::Constant(s);
  p.weight = weight;
  return p;
}

inline GaussianPart box_part(const Vec3& mu, const Vec3& scales, double weight = 1.0) {
  GaussianPart p;
  p.mu = mu;
  p.scales = scales;
  p.weight = weight;
  return p;
}

inline ShapeGMM single_sphere(double s = 0.3) {
  ShapeGMM shape;
  shape.parts.push_back(sphere_part(Vec3::Zero(), s));
  return shape;
}

// 16 parts: legs 0-3, seat 4-7, backrest 8-11, armrests 12-15. Left/right and
// front/back symmetric about x = 0 and z = 0 for the legs.
inline ShapeGMM four_leg_chair() {
  ShapeGMM shape;
  const double l = 0.18;
  for (double sx : {-1.0, 1.0})
    for (double sz : {-1.0, 1.0})
      shape.parts.push_back(box_part({sx * l, -0.47, sz * l}, {0.045, 0.43, 0.045}));
  for (double sx : {-1.0, 1.0})
    for (double sz : {-1.0, 1.0})
      shape.parts.push_back(box_part({sx * 0.2, 0.0, sz * 0.19}, {0.2, 0.045, 0.19}));
  for (double sx : {-1.0, 1.0})
    for (double y : {0.2, 0.56})
      shape.parts.push_back(box_part({sx * 0.2, y, -0.35}, {0.2, 0.16, 0.035}));
  for (double sx : {-1.0, 1.0})
    for (double z : {-0.17, 0.17})
      shape.parts.push_back(box_part({sx * 0.42, 0.22, z}, {0.035, 0.035, 0.19}));
  return shape;
}

inline Mat3 rotation_about(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

}  // namespace partsketch::testing
