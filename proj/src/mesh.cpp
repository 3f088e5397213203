#include "partsketch/mesh.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "partsketch/random.hpp"
#include "mc_tables.inc"

namespace partsketch {

namespace {

// Corner offsets in (x, y, z) matching the table numbering.
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 0, 1}, {0, 0, 1},
                               {0, 1, 0}, {1, 1, 0}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdge[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                              {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

// Keeps emitted vertices strictly inside their edge so that no two edges
// produce the same point.
constexpr double kEdgeClamp = 1e-7;
constexpr double kMinArea = 1e-12;

Vec3 cross_area(const Vec3& a, const Vec3& b, const Vec3& c) { return (b - a).cross(c - a); }

}  // namespace

std::optional<TriMesh> marching_cubes(std::span<const double> values, const kernels::GridSpec& grid,
                                      double iso) {
  const std::size_t s = grid.samples();
  if (values.size() != s * s * s) throw std::invalid_argument("marching_cubes: grid size mismatch");
  auto at = [&](std::size_t i, std::size_t j, std::size_t k) { return values[(i * s + j) * s + k]; };

  TriMesh mesh;
  std::unordered_map<std::uint64_t, std::uint32_t> edge_vertex;

  auto vertex_on = [&](std::size_t i, std::size_t j, std::size_t k, int edge) -> std::uint32_t {
    const int* c0 = kCorner[kEdge[edge][0]];
    const int* c1 = kCorner[kEdge[edge][1]];
    std::size_t p0[3] = {i + c0[0], j + c0[1], k + c0[2]};
    std::size_t p1[3] = {i + c1[0], j + c1[1], k + c1[2]};
    int axis = 0;
    while (p0[axis] == p1[axis]) ++axis;
    if (p1[axis] < p0[axis]) std::swap(p0, p1);
    const std::uint64_t key = ((static_cast<std::uint64_t>(p0[0]) * s + p0[1]) * s + p0[2]) * 3 +
                              static_cast<std::uint64_t>(axis);
    auto it = edge_vertex.find(key);
    if (it != edge_vertex.end()) return it->second;
    const double v0 = at(p0[0], p0[1], p0[2]);
    const double v1 = at(p1[0], p1[1], p1[2]);
    double t = (iso - v0) / (v1 - v0);
    t = std::clamp(t, kEdgeClamp, 1.0 - kEdgeClamp);
    Vec3 a(grid.coord(p0[0]), grid.coord(p0[1]), grid.coord(p0[2]));
    Vec3 b(grid.coord(p1[0]), grid.coord(p1[1]), grid.coord(p1[2]));
    const auto id = static_cast<std::uint32_t>(mesh.vertices.size());
    mesh.vertices.push_back(a + t * (b - a));
    edge_vertex.emplace(key, id);
    return id;
  };

  for (std::size_t i = 0; i + 1 < s; ++i)
    for (std::size_t j = 0; j + 1 < s; ++j)
      for (std::size_t k = 0; k + 1 < s; ++k) {
        int cube = 0;
        for (int c = 0; c < 8; ++c)
          if (at(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2]) < iso) cube |= 1 << c;
        if (detail::kMcEdgeTable[cube] == 0) continue;
        const int* tri = detail::kMcTriTable[cube];
        for (int t = 0; tri[t] != -1; t += 3) {
          const std::uint32_t a = vertex_on(i, j, k, tri[t]);
          const std::uint32_t b = vertex_on(i, j, k, tri[t + 1]);
          const std::uint32_t c = vertex_on(i, j, k, tri[t + 2]);
          // Table winding is clockwise from outside for this corner layout.
          mesh.triangles.push_back({a, c, b});
        }
      }

  std::erase_if(mesh.triangles, [&](const auto& t) {
    return 0.5 * cross_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]).norm() <
           kMinArea;
  });
  if (mesh.triangles.empty()) return std::nullopt;
  return mesh;
}

std::optional<TriMesh> extract_mesh(const ShapeGMM& shape, std::size_t resolution, double iso) {
  if (resolution < 8) throw std::invalid_argument("extract_mesh: resolution must be >= 8");
  if (!(iso > 0.0 && iso < 1.0)) throw std::invalid_argument("extract_mesh: iso must be in (0, 1)");
  kernels::GridSpec grid;
  grid.cells = resolution;
  std::vector<double> values(grid.samples() * grid.samples() * grid.samples());
  kernels::occupancy_grid(prepare(shape), grid, values);
  return marching_cubes(values, grid, iso);
}

MeshStats analyze(const TriMesh& mesh) {
  // directed-use count per undirected edge: +1 for (lo->hi), -1 for (hi->lo)
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::pair<int, int>> edges;
  for (const auto& t : mesh.triangles)
    for (int e = 0; e < 3; ++e) {
      const std::uint32_t a = t[e], b = t[(e + 1) % 3];
      auto key = std::minmax(a, b);
      auto& rec = edges[{key.first, key.second}];
      rec.first += 1;
      rec.second += a < b ? 1 : -1;
    }
  MeshStats st;
  st.vertices = mesh.vertices.size();
  st.faces = mesh.triangles.size();
  st.edges = edges.size();
  for (const auto& [key, rec] : edges) {
    if (rec.first == 1) ++st.boundary_edges;
    if (rec.first > 2) ++st.nonmanifold_edges;
    if (rec.first == 2 && rec.second != 0) ++st.misoriented_edges;
  }
  return st;
}

double triangle_area(const TriMesh& mesh, std::size_t t) {
  const auto& tri = mesh.triangles[t];
  return 0.5 * cross_area(mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]).norm();
}

double surface_area(const TriMesh& mesh) {
  double a = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) a += triangle_area(mesh, t);
  return a;
}

double signed_volume(const TriMesh& mesh) {
  double v = 0.0;
  for (const auto& t : mesh.triangles)
    v += mesh.vertices[t[0]].dot(mesh.vertices[t[1]].cross(mesh.vertices[t[2]]));
  return v / 6.0;
}

std::vector<Vec3> sample_surface(const TriMesh& mesh, std::size_t n, std::uint64_t seed) {
  if (mesh.empty()) throw std::invalid_argument("sample_surface: empty mesh");
  if (n == 0) throw std::invalid_argument("sample_surface: n must be >= 1");
  std::vector<double> cdf(mesh.triangles.size());
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    total += triangle_area(mesh, t);
    cdf[t] = total;
  }
  Rng rng(seed);
  std::vector<Vec3> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = rng.uniform() * total;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), r);
    const std::size_t t = std::min<std::size_t>(it - cdf.begin(), cdf.size() - 1);
    const auto& tri = mesh.triangles[t];
    const double su = std::sqrt(rng.uniform());
    const double v = rng.uniform();
    const Vec3& a = mesh.vertices[tri[0]];
    const Vec3& b = mesh.vertices[tri[1]];
    const Vec3& c = mesh.vertices[tri[2]];
    out.push_back((1.0 - su) * a + su * (1.0 - v) * b + su * v * c);
  }
  return out;
}

std::string to_obj(const TriMesh& mesh) {
  std::ostringstream os;
  os.precision(9);
  for (const auto& v : mesh.vertices) os << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : mesh.triangles)
    os << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  return os.str();
}

TriMesh parse_obj(const std::string& text) {
  TriMesh mesh;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Vec3 v;
      ls >> v.x() >> v.y() >> v.z();
      if (!ls) throw std::runtime_error("parse_obj: bad vertex line: " + line);
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::array<std::uint32_t, 3> t{};
      for (auto& idx : t) {
        std::string tok;
        ls >> tok;
        if (tok.empty()) throw std::runtime_error("parse_obj: bad face line: " + line);
        const long i = std::stol(tok.substr(0, tok.find('/')));
        if (i < 1 || static_cast<std::size_t>(i) > mesh.vertices.size())
          throw std::runtime_error("parse_obj: face index out of range: " + line);
        idx = static_cast<std::uint32_t>(i - 1);
      }
      mesh.triangles.push_back(t);
    }
  }
  return mesh;
}

}  // namespace partsketch
