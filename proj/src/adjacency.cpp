#include "partsketch/adjacency.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace partsketch {

namespace {

constexpr double kTieTolerance = 1e-12;

}  // namespace

Tensor2 pseudo_adjacency(const std::vector<Vec3>& means) {
  const std::size_t n = means.size();
  if (n < 2) throw DegenerateInputError("pseudo_adjacency needs at least 2 means");
  Tensor2 d(n, n);
  double dmax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!means[i].allFinite()) throw DegenerateInputError("pseudo_adjacency: non-finite mean");
    for (std::size_t j = i + 1; j < n; ++j) {
      d(i, j) = d(j, i) = (means[i] - means[j]).norm();
      dmax = std::max(dmax, d(i, j));
    }
  }
  if (dmax == 0.0) throw DegenerateInputError("pseudo_adjacency: all means identical");
  Tensor2 a(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    a(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = 1.0 - d(i, j) / dmax;
  }
  return a;
}

std::vector<std::size_t> PartAssignment::members(int label) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) out.push_back(i);
  return out;
}

std::vector<std::size_t> PartAssignment::cluster_sizes() const {
  std::vector<std::size_t> sizes(k, 0);
  for (int l : labels) sizes.at(static_cast<std::size_t>(l))++;
  return sizes;
}

void validate(const PartAssignment& a) {
  if (a.k == 0 || a.k > a.labels.size()) throw DimensionError("assignment: need 1 <= k <= n");
  std::vector<std::size_t> sizes(a.k, 0);
  for (int l : a.labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= a.k)
      throw DimensionError("assignment: label " + std::to_string(l) + " out of range");
    sizes[static_cast<std::size_t>(l)]++;
  }
  for (std::size_t c = 0; c < a.k; ++c)
    if (sizes[c] == 0) throw DimensionError("assignment: cluster " + std::to_string(c) + " is empty");
}

Linkage parse_linkage(const std::string& name) {
  if (name == "average") return Linkage::Average;
  if (name == "single") return Linkage::Single;
  if (name == "complete") return Linkage::Complete;
  throw std::invalid_argument("unknown linkage '" + name + "'");
}

Dendrogram build_dendrogram(const Tensor2& adj, Linkage linkage) {
  const std::size_t n = adj.rows();
  if (n == 0 || adj.cols() != n) throw DimensionError("adjacency must be square and non-empty, got " + adj.shape_string());

  // Active clusters with their dendrogram id, smallest member and size.
  struct Cluster {
    std::size_t id, min_member, size;
  };
  std::vector<Cluster> live(n);
  for (std::size_t i = 0; i < n; ++i) live[i] = {i, i, 1};
  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) dist[i][j] = 1.0 - adj(i, j);

  Dendrogram d;
  d.n = n;
  for (std::size_t step = 0; step + 1 < n; ++step) {
    std::size_t bi = 0, bj = 0;
    double best = std::numeric_limits<double>::infinity();
    std::pair<std::size_t, std::size_t> best_key{n, n};
    for (std::size_t i = 0; i < live.size(); ++i) {
      for (std::size_t j = i + 1; j < live.size(); ++j) {
        const double v = dist[i][j];
        auto key = std::minmax(live[i].min_member, live[j].min_member);
        std::pair<std::size_t, std::size_t> kp{key.first, key.second};
        if (v < best - kTieTolerance || (v <= best + kTieTolerance && kp < best_key)) {
          best = v;
          best_key = kp;
          bi = i;
          bj = j;
        }
      }
    }
    const Cluster ci = live[bi], cj = live[bj];
    Merge m;
    m.step = step;
    m.a = std::min(ci.id, cj.id);
    m.b = std::max(ci.id, cj.id);
    m.height = dist[bi][bj];
    m.size = ci.size + cj.size;
    d.merges.push_back(m);

    // Lance-Williams update into slot bi; slot bj is removed.
    for (std::size_t o = 0; o < live.size(); ++o) {
      if (o == bi || o == bj) continue;
      double v = 0.0;
      switch (linkage) {
        case Linkage::Average:
          v = (static_cast<double>(ci.size) * dist[bi][o] + static_cast<double>(cj.size) * dist[bj][o]) /
              static_cast<double>(m.size);
          break;
        case Linkage::Single: v = std::min(dist[bi][o], dist[bj][o]); break;
        case Linkage::Complete: v = std::max(dist[bi][o], dist[bj][o]); break;
      }
      dist[bi][o] = dist[o][bi] = v;
    }
    live[bi] = {n + step, std::min(ci.min_member, cj.min_member), m.size};
    live.erase(live.begin() + static_cast<std::ptrdiff_t>(bj));
    dist.erase(dist.begin() + static_cast<std::ptrdiff_t>(bj));
    for (auto& row : dist) row.erase(row.begin() + static_cast<std::ptrdiff_t>(bj));
  }
  return d;
}

PartAssignment Dendrogram::cut(std::size_t k) const {
  if (k == 0 || k > n) throw DimensionError("cut: need 1 <= k <= n (k=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
  // Union-find over dendrogram ids.
  std::vector<std::size_t> parent(2 * n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t s = 0; s < n - k; ++s) {
    parent[find(merges[s].a)] = n + s;
    parent[find(merges[s].b)] = n + s;
  }
  PartAssignment out;
  out.k = k;
  out.labels.assign(n, -1);
  std::vector<long> root_label(2 * n, -1);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = find(i);
    if (root_label[r] < 0) root_label[r] = next++;
    out.labels[i] = static_cast<int>(root_label[r]);
  }
  return out;
}

PartAssignment hierarchical_cluster(const Tensor2& adj, std::size_t k, Linkage linkage) {
  if (k == 0 || k > adj.rows())
    throw DimensionError("hierarchical_cluster: need 1 <= k <= n (k=" + std::to_string(k) +
                         ", n=" + std::to_string(adj.rows()) + ")");
  return build_dendrogram(adj, linkage).cut(k);
}

namespace {

std::vector<Vec3> cluster_centres(const std::vector<Vec3>& means, const PartAssignment& assign) {
  if (assign.n() != means.size()) throw DimensionError("assignment size does not match means");
  validate(assign);
  std::vector<Vec3> centres(assign.k, Vec3::Zero());
  auto sizes = assign.cluster_sizes();
  for (std::size_t i = 0; i < means.size(); ++i) centres[static_cast<std::size_t>(assign.labels[i])] += means[i];
  for (std::size_t c = 0; c < assign.k; ++c) centres[c] /= static_cast<double>(sizes[c]);
  return centres;
}

}  // namespace

Tensor2 part_pseudo_adjacency(const std::vector<Vec3>& means, const PartAssignment& assign) {
  return pseudo_adjacency(cluster_centres(means, assign));
}

Tensor2 pooling_matrix(const PartAssignment& assign) {
  validate(assign);
  auto sizes = assign.cluster_sizes();
  Tensor2 p(assign.k, assign.n());
  for (std::size_t i = 0; i < assign.n(); ++i) {
    const auto c = static_cast<std::size_t>(assign.labels[i]);
    p(c, i) = 1.0 / static_cast<double>(sizes[c]);
  }
  return p;
}

Tensor2 unpooling_matrix(const PartAssignment& assign) {
  validate(assign);
  Tensor2 u(assign.n(), assign.k);
  for (std::size_t i = 0; i < assign.n(); ++i) u(i, static_cast<std::size_t>(assign.labels[i])) = 1.0;
  return u;
}

Tensor2 pool_by_parts(const Tensor2& q, const PartAssignment& assign) {
  if (q.rows() != assign.n())
    throw DimensionError("pool_by_parts: " + q.shape_string() + " rows vs " + std::to_string(assign.n()) + " labels");
  validate(assign);
  auto sizes = assign.cluster_sizes();
  Tensor2 out(assign.k, q.cols());
  for (std::size_t i = 0; i < q.rows(); ++i) {
    auto dst = out.row(static_cast<std::size_t>(assign.labels[i]));
    auto src = q.row(i);
    for (std::size_t c = 0; c < q.cols(); ++c) dst[c] += src[c];
  }
  for (std::size_t r = 0; r < assign.k; ++r)
    for (auto& v : out.row(r)) v /= static_cast<double>(sizes[r]);
  return out;
}

Tensor2 unpool(const Tensor2& qp, const PartAssignment& assign) {
  validate(assign);
  if (qp.rows() != assign.k)
    throw DimensionError("unpool: " + qp.shape_string() + " rows vs k=" + std::to_string(assign.k));
  Tensor2 out(assign.n(), qp.cols());
  for (std::size_t i = 0; i < assign.n(); ++i) {
    auto src = qp.row(static_cast<std::size_t>(assign.labels[i]));
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

PartAssignment template_assignment(const std::vector<std::vector<Vec3>>& shapes_means, std::size_t k) {
  if (shapes_means.empty()) throw DegenerateInputError("template_assignment: no shapes");
  const std::size_t n = shapes_means.front().size();
  std::vector<Vec3> avg(n, Vec3::Zero());
  for (const auto& m : shapes_means) {
    if (m.size() != n) throw DimensionError("template_assignment: ragged part counts");
    for (std::size_t i = 0; i < n; ++i) avg[i] += m[i];
  }
  for (auto& v : avg) v /= static_cast<double>(shapes_means.size());
  return hierarchical_cluster(pseudo_adjacency(avg), k);
}

nlohmann::json dendrogram_to_json(const Dendrogram& d) {
  nlohmann::json merges = nlohmann::json::array();
  for (const auto& m : d.merges)
    merges.push_back({{"step", m.step}, {"pair", {m.a, m.b}}, {"height", m.height}, {"size", m.size}});
  return {{"n", d.n}, {"merges", merges}};
}

nlohmann::json assignment_to_json(const PartAssignment& a) { return {{"k", a.k}, {"labels", a.labels}}; }

PartAssignment assignment_from_json(const nlohmann::json& j) {
  PartAssignment a;
  a.k = j.at("k").get<std::size_t>();
  a.labels = j.at("labels").get<std::vector<int>>();
  validate(a);
  return a;
}

}  // namespace partsketch
