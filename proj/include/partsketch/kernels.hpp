#pragma once

// Data-parallel inner loops. Every kernel has a serial reference and an
// OpenMP variant; both visit each output element with the same summation
// order, so their results are bit-identical.

#include <array>
#include <cstddef>
#include <span>

namespace partsketch::kernels {

using Point3 = std::array<double, 3>;

// Gaussian part prepared for fast evaluation: rows of `whiten` are the part
// axes divided by the corresponding radius, so |whiten * (p - mu)|^2 is the
// Mahalanobis distance.
struct PreparedPart {
  Point3 mu{};
  std::array<Point3, 3> whiten{};
  double weight = 0.0;
};

// Contributions with Mahalanobis distance above this cutoff are exactly zero.
inline constexpr double kSupportRadius = 6.0;

double occupancy_at(std::span<const PreparedPart> parts, const Point3& p);

struct GridSpec {
  double lo = -1.2;
  double hi = 1.2;
  std::size_t cells = 48;  // samples per axis = cells + 1

  std::size_t samples() const { return cells + 1; }
  double step() const { return (hi - lo) / static_cast<double>(cells); }
  double coord(std::size_t i) const { return lo + step() * static_cast<double>(i); }
};

namespace serial {

// c (m x n) = a (m x k) * b (k x n)
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);
// c (m x n) = a (m x k) * b^T, b stored n x k
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n);
// c (m x n) = a^T * b, a stored k x m, b stored k x n
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n);

// values[(ix * s + iy) * s + iz], s = grid.samples()
void occupancy_grid(std::span<const PreparedPart> parts, const GridSpec& grid,
                    std::span<double> values);

// out[i] = min_j |from[i] - to[j]|^2
void nearest_sq_dist(std::span<const Point3> from, std::span<const Point3> to,
                     std::span<double> out);

}  // namespace serial

namespace parallel {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n);
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n);
void occupancy_grid(std::span<const PreparedPart> parts, const GridSpec& grid,
                    std::span<double> values);
void nearest_sq_dist(std::span<const Point3> from, std::span<const Point3> to,
                     std::span<double> out);

}  // namespace parallel

// Picks the OpenMP variant for large problems outside an active parallel
// region, otherwise the serial one. Results do not depend on the choice.
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n);
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n);
void occupancy_grid(std::span<const PreparedPart> parts, const GridSpec& grid,
                    std::span<double> values);
void nearest_sq_dist(std::span<const Point3> from, std::span<const Point3> to,
                     std::span<double> out);

int max_threads();

}  // namespace partsketch::kernels
