// Serial vs OpenMP kernel timings. Also checks that both variants agree bit for bit.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "partsketch/gmm_shape.hpp"
#include "partsketch/kernels.hpp"

using namespace partsketch;
namespace k = partsketch::kernels;

namespace {

double best_ms(const std::function<void()>& f, int reps) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

bool same(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

int report(const char* name, double serial, double parallel, bool identical) {
  std::printf("%-26s serial %9.3f ms   parallel %9.3f ms   speedup %5.2fx   %s\n", name, serial, parallel,
              serial / parallel, identical ? "identical" : "MISMATCH");
  return identical ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  const int reps = argc > 1 ? std::stoi(argv[1]) : 5;
  std::printf("threads: %d\n", k::max_threads());
  std::mt19937_64 g(1);
  std::normal_distribution<double> nd;
  int failures = 0;

  for (std::size_t n : {64, 256}) {
    std::vector<double> a(n * n), b(n * n), c1(n * n), c2(n * n);
    for (auto& x : a) x = nd(g);
    for (auto& x : b) x = nd(g);
    const double s = best_ms([&] { k::serial::matmul(a, b, c1, n, n, n); }, reps);
    const double p = best_ms([&] { k::parallel::matmul(a, b, c2, n, n, n); }, reps);
    failures += report(("matmul " + std::to_string(n)).c_str(), s, p, same(c1, c2));
  }

  ShapeGMM shape;
  for (int i = 0; i < 16; ++i) {
    GaussianPart part;
    part.mu = Vec3(0.5 * nd(g), 0.5 * nd(g), 0.5 * nd(g));
    part.scales = Vec3(0.1 + 0.05 * std::abs(nd(g)), 0.1, 0.15);
    shape.parts.push_back(part);
  }
  const auto prepared = prepare(shape);
  for (std::size_t cells : {48, 96}) {
    k::GridSpec grid;
    grid.cells = cells;
    const std::size_t total = grid.samples() * grid.samples() * grid.samples();
    std::vector<double> v1(total), v2(total);
    const double s = best_ms([&] { k::serial::occupancy_grid(prepared, grid, v1); }, reps);
    const double p = best_ms([&] { k::parallel::occupancy_grid(prepared, grid, v2); }, reps);
    failures += report(("occupancy_grid " + std::to_string(cells)).c_str(), s, p, same(v1, v2));
  }

  for (std::size_t n : {2048, 8192}) {
    std::vector<k::Point3> from(n), to(n);
    for (auto& x : from) x = {nd(g), nd(g), nd(g)};
    for (auto& x : to) x = {nd(g), nd(g), nd(g)};
    std::vector<double> d1(n), d2(n);
    const double s = best_ms([&] { k::serial::nearest_sq_dist(from, to, d1); }, reps);
    const double p = best_ms([&] { k::parallel::nearest_sq_dist(from, to, d2); }, reps);
    failures += report(("nearest_sq_dist " + std::to_string(n)).c_str(), s, p, same(d1, d2));
  }
  return failures;
}
