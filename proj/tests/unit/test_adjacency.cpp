#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "doctest.h"
#include "partsketch/adjacency.hpp"
#include "partsketch/autodiff.hpp"
#include "partsketch/random.hpp"
#include "../support/cluster_oracle.hpp"
#include "../support/shapes.hpp"

using namespace partsketch;
using partsketch::testing::reference_average_linkage;

namespace {

std::vector<Vec3> random_means(Rng& rng, std::size_t n) {
  std::vector<Vec3> m(n);
  for (auto& v : m) v = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
  return m;
}

}  // namespace

TEST_CASE("pseudo_adjacency: collinear hand example") {
  auto a = pseudo_adjacency({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}});
  Tensor2 expected{{1, 0.5, 0}, {0.5, 1, 0.5}, {0, 0.5, 1}};
  CHECK(max_abs_diff(a, expected) < 1e-15);
}

TEST_CASE("pseudo_adjacency: structure on 16 random means") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    auto m = random_means(rng, 16);
    auto a = pseudo_adjacency(m);
    REQUIRE(a.rows() == 16);
    std::size_t zeros = 0;
    std::vector<std::pair<double, double>> pairs;
    for (std::size_t i = 0; i < 16; ++i) {
      CHECK(a(i, i) == 1.0);
      for (std::size_t j = 0; j < 16; ++j) {
        CHECK(std::abs(a(i, j) - a(j, i)) <= 1e-12);
        CHECK(a(i, j) >= 0.0);
        CHECK(a(i, j) <= 1.0);
        if (i < j) {
          zeros += a(i, j) == 0.0 ? 1 : 0;
          pairs.push_back({(m[i] - m[j]).norm(), a(i, j)});
        }
      }
    }
    CHECK(zeros >= 1);
    std::sort(pairs.begin(), pairs.end());
    for (std::size_t p = 1; p < pairs.size(); ++p)
      if (pairs[p].first > pairs[p - 1].first) CHECK(pairs[p].second < pairs[p - 1].second);
  }
}

TEST_CASE("pseudo_adjacency: rigid-motion invariance and degenerate input") {
  Rng rng(6);
  auto m = random_means(rng, 12);
  Mat3 r = testing::rotation_about({0.3, -1, 2}, 1.1);
  Vec3 t(0.4, -0.2, 0.9);
  std::vector<Vec3> moved;
  for (const auto& v : m) moved.push_back(r * v + t);
  CHECK(max_abs_diff(pseudo_adjacency(m), pseudo_adjacency(moved)) < 1e-12);
  CHECK_THROWS_AS(pseudo_adjacency({{1, 1, 1}, {1, 1, 1}}), DegenerateInputError);
  CHECK_THROWS_AS(pseudo_adjacency({{1, 1, 1}}), DegenerateInputError);
}

TEST_CASE("hierarchical_cluster: two well-separated pairs") {
  auto a = pseudo_adjacency({{0, 0, 0}, {0.1, 0, 0}, {10, 0, 0}, {10.1, 0, 0}});
  auto c = hierarchical_cluster(a, 2);
  CHECK(c.labels == std::vector<int>{0, 0, 1, 1});
  auto singletons = hierarchical_cluster(a, 4);
  CHECK(singletons.labels == std::vector<int>{0, 1, 2, 3});
  CHECK_THROWS_AS(hierarchical_cluster(a, 5), DimensionError);
  CHECK_THROWS_AS(hierarchical_cluster(a, 0), DimensionError);
}

TEST_CASE("hierarchical_cluster: matches the recompute-from-scratch reference") {
  Rng rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const auto n = static_cast<std::size_t>(rng.integer(2, 8));
    auto a = pseudo_adjacency(random_means(rng, n));
    for (std::size_t k = 1; k <= n; ++k) {
      CAPTURE(trial);
      CAPTURE(k);
      CHECK(hierarchical_cluster(a, k) == reference_average_linkage(a, k));
    }
  }
}

TEST_CASE("hierarchical_cluster: tie rule on an exactly symmetric layout") {
  // Square corners: all four edges are equally short. The (0,1) pair merges first.
  std::vector<Vec3> sq{{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
  auto a = pseudo_adjacency(sq);
  auto d = build_dendrogram(a);
  CHECK(d.merges[0].a == 0);
  CHECK(d.merges[0].b == 1);
  CHECK(hierarchical_cluster(a, 2) == reference_average_linkage(a, 2));
}

TEST_CASE("hierarchical_cluster: permutation equivariance") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    auto m = random_means(rng, 10);
    std::vector<std::size_t> perm(10);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = 9; i > 0; --i) std::swap(perm[i], perm[static_cast<std::size_t>(rng.integer(0, i))]);
    std::vector<Vec3> pm(10);
    for (std::size_t i = 0; i < 10; ++i) pm[i] = m[perm[i]];
    auto c = hierarchical_cluster(pseudo_adjacency(m), 4);
    auto pc = hierarchical_cluster(pseudo_adjacency(pm), 4);
    // Same partition: points i and j share a cluster in one iff they do in the other.
    for (std::size_t i = 0; i < 10; ++i)
      for (std::size_t j = 0; j < 10; ++j)
        CHECK((pc.labels[i] == pc.labels[j]) == (c.labels[perm[i]] == c.labels[perm[j]]));
  }
}

TEST_CASE("dendrogram: n-1 merges, monotone heights, JSON fields") {
  Rng rng(9);
  auto d = build_dendrogram(pseudo_adjacency(random_means(rng, 16)));
  REQUIRE(d.merges.size() == 15);
  for (std::size_t s = 1; s < d.merges.size(); ++s) CHECK(d.merges[s].height >= d.merges[s - 1].height - 1e-12);
  CHECK(d.merges.back().size == 16);
  auto j = dendrogram_to_json(d);
  CHECK(j["merges"][0].contains("step"));
  CHECK(j["merges"][0]["pair"].size() == 2);
  CHECK(j["merges"][0].contains("height"));
}

TEST_CASE("part_pseudo_adjacency: singleton identity, symmetric chair, K=4") {
  Rng rng(10);
  auto m = random_means(rng, 6);
  PartAssignment single{6, {0, 1, 2, 3, 4, 5}};
  CHECK(max_abs_diff(part_pseudo_adjacency(m, single), pseudo_adjacency(m)) < 1e-15);

  auto chair = all_means(testing::four_leg_chair());
  // Each leg its own cluster plus everything else in one: legs 0..3 are
  // corners of a square, so side pairs share one value and diagonals another.
  PartAssignment legs{5, std::vector<int>(16, 4)};
  for (int i = 0; i < 4; ++i) legs.labels[i] = i;
  auto ap = part_pseudo_adjacency(chair, legs);
  // layout order: (-,-), (-,+), (+,-), (+,+) in (x, z)
  CHECK(std::abs(ap(0, 1) - ap(2, 3)) < 1e-12);
  CHECK(std::abs(ap(0, 2) - ap(1, 3)) < 1e-12);
  CHECK(std::abs(ap(0, 1) - ap(0, 2)) < 1e-12);
  CHECK(std::abs(ap(0, 3) - ap(1, 2)) < 1e-12);
  CHECK(std::abs(ap(0, 4) - ap(2, 4)) < 1e-12);
  CHECK(std::abs(ap(1, 4) - ap(3, 4)) < 1e-12);

  auto k4 = hierarchical_cluster(pseudo_adjacency(chair), 4);
  auto a4 = part_pseudo_adjacency(chair, k4);
  CHECK(a4.rows() == 4);
  CHECK(a4.cols() == 4);
}

TEST_CASE("pool/unpool: identities and re-computation") {
  Rng rng(11);
  Tensor2 x(6, 5);
  for (auto& v : x.values()) v = rng.normal();
  PartAssignment single{6, {0, 1, 2, 3, 4, 5}};
  CHECK(pool_by_parts(x, single) == x);

  PartAssignment a{3, {0, 2, 1, 0, 2, 2}};
  Tensor2 y(3, 5);
  for (auto& v : y.values()) v = rng.normal();
  CHECK(max_abs_diff(pool_by_parts(unpool(y, a), a), y) < 1e-15);

  auto pu = unpool(pool_by_parts(x, a), a);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t c = 0; c < 5; ++c) {
      double s = 0.0;
      double cnt = 0.0;
      for (std::size_t j = 0; j < 6; ++j)
        if (a.labels[j] == a.labels[i]) {
          s += x(j, c);
          cnt += 1.0;
        }
      CHECK(std::abs(pu(i, c) - s / cnt) < 1e-14);
    }
  CHECK(max_abs_diff(pool_by_parts(pu, a), pool_by_parts(x, a)) < 1e-14);
  CHECK(max_abs_diff(matmul(pooling_matrix(a), x), pool_by_parts(x, a)) < 1e-14);
  CHECK(max_abs_diff(matmul(unpooling_matrix(a), y), unpool(y, a)) == 0.0);
  CHECK_THROWS_AS(pool_by_parts(Tensor2(5, 5), a), DimensionError);
  CHECK_THROWS_AS(validate(PartAssignment{3, {0, 0, 1}}), DimensionError);
}

TEST_CASE("hierarchical_cluster: K=4 keeps the four legs of the symmetric chair together") {
  auto a = hierarchical_cluster(pseudo_adjacency(all_means(testing::four_leg_chair())), 4);
  CHECK(a.k == 4);
  for (int i = 1; i < 4; ++i) CHECK(a.labels[i] == a.labels[0]);
  for (int l : a.labels) {
    CHECK(l >= 0);
    CHECK(l < 4);
  }
}
