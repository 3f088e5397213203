#include <cmath>
#include <random>

#include "doctest.h"
#include "partsketch/autodiff.hpp"
#include "partsketch/kernels.hpp"
#include "../support/fd_check.hpp"

using namespace partsketch;
using partsketch::testing::check_gradients;
using partsketch::testing::random_tensor;

TEST_CASE("matmul: identity and hand arithmetic") {
  Tensor2 m{{1, 2, 3}, {4, 5, 6}, {7, 8, 9}};
  CHECK(matmul(Tensor2::identity(3), m) == m);
  Tensor2 a{{1, 2}, {3, 4}};
  Tensor2 b{{1}, {1}};
  CHECK(matmul(a, b) == Tensor2{{3}, {7}});
}

TEST_CASE("matmul: shape mismatch names both shapes") {
  Tensor2 a(2, 3), b(2, 3);
  try {
    matmul(a, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("(2x3)") != std::string::npos);
  }
}

TEST_CASE("matmul: gradient of sum matches finite differences") {
  std::mt19937_64 rng(11);
  ParameterSet ps;
  auto a = ps.add("a", random_tensor(rng, 4, 5));
  auto b = ps.add("b", random_tensor(rng, 5, 3));
  auto rep = check_gradients(ps, [&](Tape& t) { return ad::sum(ad::matmul(t.param(a), t.param(b))); });
  CHECK(rep.max_rel_error < 1e-6);
}

TEST_CASE("softmax_rows: symmetry, stability and row sums") {
  Tensor2 x{{0, 0}, {1000, 0}};
  auto y = softmax_rows(x);
  CHECK(y(0, 0) == doctest::Approx(0.5));
  CHECK(y(0, 1) == doctest::Approx(0.5));
  CHECK(y(1, 0) == doctest::Approx(1.0));
  CHECK(y(1, 1) < 1e-300);
  CHECK(y.all_finite());

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto r = random_tensor(rng, 3, 4, trial < 10 ? 1.0 : 1e6);
    auto s = softmax_rows(r);
    for (std::size_t i = 0; i < 3; ++i) {
      double sum = 0.0;
      for (double v : s.row(i)) sum += v;
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("softmax_rows: gradient matches finite differences") {
  std::mt19937_64 rng(5);
  ParameterSet ps;
  auto x = ps.add("x", random_tensor(rng, 3, 4));
  auto w = random_tensor(rng, 3, 4);
  auto rep = check_gradients(ps, [&](Tape& t) {
    return ad::sum(ad::hadamard(ad::softmax_rows(t.param(x)), t.constant(w)));
  });
  CHECK(rep.max_rel_error < 1e-6);
}

TEST_CASE("layer_norm: constant row, two-point row") {
  Tensor2 gain(1, 2, 1.0), bias(1, 2, 0.0);
  auto y = layer_norm(Tensor2{{3, 3}}, gain, bias);
  CHECK(y(0, 0) == 0.0);
  CHECK(y(0, 1) == 0.0);
  auto z = layer_norm(Tensor2{{1, 3}}, gain, bias);
  const double expect = 1.0 / std::sqrt(1.0 + 1e-5);
  CHECK(z(0, 0) == doctest::Approx(-expect).epsilon(1e-14));
  CHECK(z(0, 1) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("layer_norm: gradient matches finite differences") {
  std::mt19937_64 rng(9);
  ParameterSet ps;
  auto x = ps.add("x", random_tensor(rng, 4, 6));
  auto g = ps.add("gain", random_tensor(rng, 1, 6));
  auto b = ps.add("bias", random_tensor(rng, 1, 6));
  auto w = random_tensor(rng, 4, 6);
  auto rep = check_gradients(ps, [&](Tape& t) {
    auto y = ad::layer_norm(t.param(x), t.param(g), t.param(b));
    return ad::sum(ad::hadamard(y, t.constant(w)));
  });
  CHECK(rep.max_rel_error < 1e-5);
}

TEST_CASE("mse and l1 values and gradients") {
  CHECK(mse(Tensor2{{0}}, Tensor2{{2}}) == 4.0);
  CHECK(l1(Tensor2{{0}}, Tensor2{{2}}) == 2.0);
  Tensor2 a{{1, 2}, {3, 4}};
  CHECK(mse(a, a) == 0.0);
  CHECK(l1(a, a) == 0.0);
  CHECK_THROWS_AS(mse(a, Tensor2(1, 2)), DimensionError);

  std::mt19937_64 rng(13);
  ParameterSet ps;
  auto p = ps.add("p", random_tensor(rng, 3, 5));
  auto q = ps.add("q", random_tensor(rng, 3, 5));
  auto rep = check_gradients(ps, [&](Tape& t) {
    return ad::add(ad::mse(t.param(p), t.param(q)), ad::l1(t.param(p), t.param(q)));
  });
  CHECK(rep.max_rel_error < 1e-6);
}

TEST_CASE("elementwise and structural ops: gradients over seeds") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    ParameterSet ps;
    auto a = ps.add("a", random_tensor(rng, 3, 4));
    auto b = ps.add("b", random_tensor(rng, 3, 4));
    auto r = ps.add("row", random_tensor(rng, 1, 4));
    auto rep = check_gradients(ps, [&](Tape& t) {
      auto x = ad::add_row(t.param(a), t.param(r));
      auto s = ad::sigmoid(ad::matmul_nt(x, t.param(b)));
      auto u = ad::tanh(ad::sub(t.param(a), ad::scale(t.param(b), 0.5)));
      auto cat = ad::concat_cols({ad::slice_cols(u, 1, 2), ad::transpose(s)});
      return ad::sum(ad::hadamard(cat, cat));
    });
    CHECK_MESSAGE(rep.max_rel_error < 1e-6, "seed " << seed << " worst " << rep.worst_param);
  }
}

TEST_CASE("tape: second backward is an error, gradients shaped like parameters") {
  ParameterSet ps;
  auto a = ps.add("a", Tensor2{{1, 2}});
  auto unused = ps.add("unused", Tensor2(3, 3, 1.0));
  Tape t(&ps);
  auto loss = ad::sum(t.param(a));
  auto g = t.backward(loss);
  REQUIRE(g.size() == 2);
  CHECK(g[0] == Tensor2{{1, 1}});
  CHECK(g[1].same_shape(ps.value(unused)));
  CHECK(g[1] == Tensor2(3, 3, 0.0));
  CHECK_THROWS_AS(t.backward(loss), BackwardError);
}

TEST_CASE("tape: non-scalar loss rejected") {
  ParameterSet ps;
  auto a = ps.add("a", Tensor2{{1, 2}});
  Tape t(&ps);
  CHECK_THROWS_AS(t.backward(t.param(a)), DimensionError);
}

TEST_CASE("kernels: OpenMP variants agree bit-for-bit with serial references") {
  std::mt19937_64 rng(21);
  auto a = random_tensor(rng, 37, 53);
  auto b = random_tensor(rng, 53, 29);
  auto bt = b.transposed();
  auto at = a.transposed();
  Tensor2 c1(37, 29), c2(37, 29);
  kernels::serial::matmul(a.values(), b.values(), c1.values(), 37, 53, 29);
  kernels::parallel::matmul(a.values(), b.values(), c2.values(), 37, 53, 29);
  CHECK(c1 == c2);
  kernels::serial::matmul_nt(a.values(), bt.values(), c1.values(), 37, 53, 29);
  kernels::parallel::matmul_nt(a.values(), bt.values(), c2.values(), 37, 53, 29);
  CHECK(c1 == c2);
  kernels::serial::matmul_tn(at.values(), b.values(), c1.values(), 37, 53, 29);
  kernels::parallel::matmul_tn(at.values(), b.values(), c2.values(), 37, 53, 29);
  CHECK(c1 == c2);
  CHECK(max_abs_diff(c1, matmul(a, b)) < 1e-12);

  std::vector<kernels::Point3> p(200), q(150);
  std::uniform_real_distribution<double> u(-1, 1);
  for (auto& x : p) x = {u(rng), u(rng), u(rng)};
  for (auto& x : q) x = {u(rng), u(rng), u(rng)};
  std::vector<double> d1(p.size()), d2(p.size());
  kernels::serial::nearest_sq_dist(p, q, d1);
  kernels::parallel::nearest_sq_dist(p, q, d2);
  CHECK(d1 == d2);
}
