#include "partsketch/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace partsketch::kernels {

namespace {

constexpr std::size_t kParallelFlops = 1u << 16;

bool can_fork() {
#ifdef _OPENMP
  return omp_get_max_threads() > 1 && !omp_in_parallel();
#else
  return false;
#endif
}

inline void matmul_row(std::span<const double> a, std::span<const double> b, double* crow,
                       std::size_t i, std::size_t k, std::size_t n) {
  std::fill(crow, crow + n, 0.0);
  const double* arow = a.data() + i * k;
  for (std::size_t p = 0; p < k; ++p) {
    const double av = arow[p];
    const double* brow = b.data() + p * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
  }
}

inline void matmul_nt_row(std::span<const double> a, std::span<const double> b, double* crow,
                          std::size_t i, std::size_t k, std::size_t n) {
  const double* arow = a.data() + i * k;
  for (std::size_t j = 0; j < n; ++j) {
    const double* brow = b.data() + j * k;
    double s = 0.0;
    for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
    crow[j] = s;
  }
}

inline void matmul_tn_row(std::span<const double> a, std::span<const double> b, double* crow,
                          std::size_t i, std::size_t m, std::size_t k, std::size_t n) {
  std::fill(crow, crow + n, 0.0);
  for (std::size_t p = 0; p < k; ++p) {
    const double av = a[p * m + i];
    const double* brow = b.data() + p * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
  }
}

inline double sq_dist(const Point3& a, const Point3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

inline double nearest_one(const Point3& p, std::span<const Point3> to) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& q : to) best = std::min(best, sq_dist(p, q));
  return best;
}

inline void occupancy_row(std::span<const PreparedPart> parts, const GridSpec& grid,
                          std::span<double> values, std::size_t ix) {
  const std::size_t s = grid.samples();
  for (std::size_t iy = 0; iy < s; ++iy)
    for (std::size_t iz = 0; iz < s; ++iz)
      values[(ix * s + iy) * s + iz] =
          occupancy_at(parts, {grid.coord(ix), grid.coord(iy), grid.coord(iz)});
}

}  // namespace

double occupancy_at(std::span<const PreparedPart> parts, const Point3& p) {
  constexpr double cutoff = kSupportRadius * kSupportRadius;
  double best = 0.0;
  for (const auto& part : parts) {
    if (part.weight <= 0.0) continue;
    const Point3 d{p[0] - part.mu[0], p[1] - part.mu[1], p[2] - part.mu[2]};
    double m2 = 0.0;
    for (const auto& w : part.whiten) {
      const double t = w[0] * d[0] + w[1] * d[1] + w[2] * d[2];
      m2 += t * t;
    }
    if (m2 > cutoff) continue;
    best = std::max(best, part.weight * std::exp(-0.5 * m2));
  }
  return best;
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace serial {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) matmul_row(a, b, c.data() + i * n, i, k, n);
}

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) matmul_nt_row(a, b, c.data() + i * n, i, k, n);
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) matmul_tn_row(a, b, c.data() + i * n, i, m, k, n);
}

void occupancy_grid(std::span<const PreparedPart> parts, const GridSpec& grid,
                    std::span<double> values) {
  for (std::size_t ix = 0; ix < grid.samples(); ++ix) occupancy_row(parts, grid, values, ix);
}

void nearest_sq_dist(std::span<const Point3> from, std::span<const Point3> to,
                     std::span<double> out) {
  for (std::size_t i = 0; i < from.size(); ++i) out[i] = nearest_one(from[i], to);
}

}  // namespace serial

namespace parallel {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i)
    matmul_row(a, b, c.data() + static_cast<std::size_t>(i) * n, static_cast<std::size_t>(i), k,
               n);
}

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i)
    matmul_nt_row(a, b, c.data() + static_cast<std::size_t>(i) * n, static_cast<std::size_t>(i),
                  k, n);
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i)
    matmul_tn_row(a, b, c.data() + static_cast<std::size_t>(i) * n, static_cast<std::size_t>(i),
                  m, k, n);
}

void occupancy_grid(std::span<const PreparedPart> parts, const GridSpec& grid,
                    std::span<double> values) {
  const auto s = static_cast<std::ptrdiff_t>(grid.samples());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ix = 0; ix < s; ++ix)
    occupancy_row(parts, grid, values, static_cast<std::size_t>(ix));
}

void nearest_sq_dist(std::span<const Point3> from, std::span<const Point3> to,
                     std::span<double> out) {
  const auto n = static_cast<std::ptrdiff_t>(from.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = nearest_one(from[static_cast<std::size_t>(i)], to);
}

}  // namespace parallel

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
  if (m * k * n >= kParallelFlops && can_fork())
    parallel::matmul(a, b, c, m, k, n);
  else
    serial::matmul(a, b, c, m, k, n);
}

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
  if (m * k * n >= kParallelFlops && can_fork())
    parallel::matmul_nt(a, b, c, m, k, n);
  else
    serial::matmul_nt(a, b, c, m, k, n);
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
  if (m * k * n >= kParallelFlops && can_fork())
    parallel::matmul_tn(a, b, c, m, k, n);
  else
    serial::matmul_tn(a, b, c, m, k, n);
}

void occupancy_grid(std::span<const PreparedPart> parts, const GridSpec& grid,
                    std::span<double> values) {
  if (can_fork())
    parallel::occupancy_grid(parts, grid, values);
  else
    serial::occupancy_grid(parts, grid, values);
}

void nearest_sq_dist(std::span<const Point3> from, std::span<const Point3> to,
                     std::span<double> out) {
  if (from.size() * to.size() >= kParallelFlops && can_fork())
    parallel::nearest_sq_dist(from, to, out);
  else
    serial::nearest_sq_dist(from, to, out);
}

}  // namespace partsketch::kernels
