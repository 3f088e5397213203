#pragma once

// Pseudo ground-truth adjacency and agglomerative grouping of parts.

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "json.hpp"
#include "partsketch/gmm_shape.hpp"
#include "partsketch/tensor.hpp"

namespace partsketch {

class DegenerateInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A_ij = 1 - |mu_i - mu_j| / max_kl |mu_k - mu_l|, diagonal exactly 1.
Tensor2 pseudo_adjacency(const std::vector<Vec3>& means);

struct PartAssignment {
  std::size_t k = 0;
  std::vector<int> labels;

  std::size_t n() const { return labels.size(); }
  std::vector<std::size_t> members(int label) const;
  std::vector<std::size_t> cluster_sizes() const;
  friend bool operator==(const PartAssignment&, const PartAssignment&) = default;
};

void validate(const PartAssignment& a);

enum class Linkage { Average, Single, Complete };

struct Merge {
  std::size_t step = 0;
  // Cluster ids: 0..n-1 are the inputs, n + s is the cluster formed at step s.
  std::size_t a = 0, b = 0;
  double height = 0.0;
  std::size_t size = 0;
};

struct Dendrogram {
  std::size_t n = 0;
  std::vector<Merge> merges;  // n - 1 entries

  // State after n - k merges, labels renumbered by smallest member.
  PartAssignment cut(std::size_t k) const;
};

// Agglomerative clustering on dissimilarity 1 - A. Among equally close
// cluster pairs (within 1e-12) the one whose (smaller min-member,
// larger min-member) pair is lexicographically smallest merges first.
Dendrogram build_dendrogram(const Tensor2& adjacency, Linkage linkage = Linkage::Average);
PartAssignment hierarchical_cluster(const Tensor2& adjacency, std::size_t k,
                                    Linkage linkage = Linkage::Average);

Tensor2 part_pseudo_adjacency(const std::vector<Vec3>& means, const PartAssignment& assign);

// k x n averaging matrix P, so that P * Q is the per-cluster row mean.
Tensor2 pooling_matrix(const PartAssignment& assign);
// n x k 0/1 broadcast matrix U, so that U * Qp copies cluster rows to members.
Tensor2 unpooling_matrix(const PartAssignment& assign);
Tensor2 pool_by_parts(const Tensor2& q, const PartAssignment& assign);
Tensor2 unpool(const Tensor2& qp, const PartAssignment& assign);

// Category-level grouping: per-slot means averaged over shapes, then clustered.
PartAssignment template_assignment(const std::vector<std::vector<Vec3>>& shapes_means, std::size_t k);

nlohmann::json dendrogram_to_json(const Dendrogram& d);
nlohmann::json assignment_to_json(const PartAssignment& a);
PartAssignment assignment_from_json(const nlohmann::json& j);

Linkage parse_linkage(const std::string& name);

}  // namespace partsketch
