#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "partsketch/gmm_shape.hpp"
#include "partsketch/kernels.hpp"

namespace partsketch {

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;

  bool empty() const { return triangles.empty(); }
};

struct MeshStats {
  std::size_t vertices = 0;
  std::size_t edges = 0;
  std::size_t faces = 0;
  std::size_t boundary_edges = 0;   // used by one triangle
  std::size_t nonmanifold_edges = 0;  // used by more than two
  std::size_t misoriented_edges = 0;  // both triangles traverse it the same way

  long euler() const {
    return static_cast<long>(vertices) - static_cast<long>(edges) + static_cast<long>(faces);
  }
  bool watertight() const { return boundary_edges == 0 && nonmanifold_edges == 0; }
};

struct MeshOptions {
  std::size_t resolution = 48;
  double iso = 0.5;
};

// Marching cubes over a sampled scalar field laid out as kernels::occupancy_grid
// writes it. Inside is value >= iso. Vertices are shared between adjacent
// cells; triangles wind counter-clockwise seen from outside. Returns nullopt
// when the field never crosses iso.
std::optional<TriMesh> marching_cubes(std::span<const double> values, const kernels::GridSpec& grid,
                                      double iso);

// Requires resolution >= 8 and 0 < iso < 1; the grid spans [-1.2, 1.2]^3.
std::optional<TriMesh> extract_mesh(const ShapeGMM& shape, std::size_t resolution = 48,
                                    double iso = 0.5);

MeshStats analyze(const TriMesh& mesh);
double signed_volume(const TriMesh& mesh);
double surface_area(const TriMesh& mesh);
double triangle_area(const TriMesh& mesh, std::size_t t);

// Area-weighted uniform samples; deterministic for a given seed.
std::vector<Vec3> sample_surface(const TriMesh& mesh, std::size_t n = 2048, std::uint64_t seed = 0);

// Vertices then faces, 1-based indices, every line newline-terminated.
std::string to_obj(const TriMesh& mesh);
TriMesh parse_obj(const std::string& text);

}  // namespace partsketch
