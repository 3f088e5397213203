#include <chrono>
#include <cmath>
#include <random>

#include "doctest.h"
#include "partsketch/encoders.hpp"
#include "partsketch/isg_net.hpp"
#include "partsketch/latent_head.hpp"
#include "partsketch/tvt_decoder.hpp"
#include "../support/fd_check.hpp"

using namespace partsketch;
using partsketch::testing::check_gradients;
using partsketch::testing::random_tensor;

namespace {

void zero_all(ParameterSet& ps) {
  for (auto& v : ps.values()) v.fill(0.0);
}

void zero_matching(ParameterSet& ps, const std::string& needle, double value = 0.0) {
  for (std::size_t i = 0; i < ps.size(); ++i)
    if (ps.name(i).find(needle) != std::string::npos) ps.values()[i].fill(value);
}

DecoderConfig small_decoder(std::size_t heads = 1) {
  DecoderConfig c;
  c.d = 8;
  c.heads = heads;
  c.ff_mult = 2;
  c.blocks = 1;
  return c;
}

}  // namespace

TEST_CASE("attention: single key/value token and zero query/key weights") {
  Rng rng(1);
  ParameterSet ps;
  auto att = make_attention(ps, "att", 6, 1, rng);
  std::mt19937_64 g(2);
  Tensor2 q = random_tensor(g, 5, 6), kv1 = random_tensor(g, 1, 6), kv = random_tensor(g, 4, 6);

  Tape t(&ps);
  auto out = attention(t, att, t.constant(q), t.constant(kv1)).value();
  auto expected = matmul(matmul(kv1, ps.value(att.wv.w)), ps.value(att.wo.w));
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 6; ++c) CHECK(std::abs(out(r, c) - expected(0, c)) < 1e-12);

  ps.value(att.wq.w).fill(0.0);
  ps.value(att.wk.w).fill(0.0);
  Tape t2(&ps);
  auto uni = attention(t2, att, t2.constant(q), t2.constant(kv)).value();
  auto vals = matmul(matmul(kv, ps.value(att.wv.w)), ps.value(att.wo.w));
  for (std::size_t c = 0; c < 6; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < 4; ++r) mean += vals(r, c) / 4.0;
    for (std::size_t r = 0; r < 5; ++r) CHECK(std::abs(uni(r, c) - mean) < 1e-12);
  }
}

TEST_CASE("attention: weight rows sum to one; gradients for one and two heads") {
  for (std::size_t heads : {1u, 2u}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng rng(seed);
      ParameterSet ps;
      auto att = make_attention(ps, "att", 8, heads, rng);
      std::mt19937_64 g(seed + 100);
      Tensor2 q = random_tensor(g, 5, 8), kv = random_tensor(g, 7, 8);
      auto w = attention_weights(ps, att, q, kv, heads - 1);
      for (std::size_t r = 0; r < 5; ++r) {
        double s = 0.0;
        for (double v : w.row(r)) s += v;
        CHECK(std::abs(s - 1.0) < 1e-12);
      }
      auto target = random_tensor(g, 5, 8);
      auto rep = check_gradients(ps, [&](Tape& t) {
        return ad::mse(attention(t, att, t.constant(q), t.constant(kv)), t.constant(target));
      });
      CAPTURE(seed);
      CHECK(rep.max_rel_error < 1e-4);
    }
  }
  Rng rng(0);
  ParameterSet ps;
  CHECK_THROWS_AS(make_attention(ps, "bad", 8, 3, rng), DimensionError);
}

TEST_CASE("decoder_block: zero weights reduce to the composed norms") {
  for (bool parallel : {false, true}) {
    Rng rng(3);
    ParameterSet ps;
    auto cfg = small_decoder();
    cfg.parallel_cross = parallel;
    auto block = make_decoder_block(ps, "b", cfg, rng);
    for (std::size_t i = 0; i < ps.size(); ++i)
      if (ps.name(i).find(".n_") == std::string::npos) ps.values()[i].fill(0.0);
    std::mt19937_64 g(4);
    Tensor2 x = random_tensor(g, 6, 8), vis = random_tensor(g, 9, 8), txt = random_tensor(g, 3, 8);
    Tape t(&ps);
    auto out = decoder_block(t, t.constant(x), {t.constant(vis), t.constant(txt)}, block, cfg).value();

    const std::size_t norms = parallel ? 5 : 6;
    Tensor2 expected = x;
    Tensor2 gain(1, 8, 1.0), bias(1, 8, 0.0);
    for (std::size_t k = 0; k < norms; ++k) expected = layer_norm(expected, gain, bias);
    CHECK(out == expected);

    // A normalised input is a near fixed point of the norms.
    Tape t2(&ps);
    Tensor2 xn = layer_norm(x, gain, bias);
    auto out2 = decoder_block(t2, t2.constant(xn), {t2.constant(vis), t2.constant(txt)}, block, cfg).value();
    CHECK(max_abs_diff(out2, xn) < 1e-4);
  }
}

TEST_CASE("decoder_block: visual and text token order does not matter") {
  Rng rng(5);
  ParameterSet ps;
  auto cfg = small_decoder(2);
  auto block = make_decoder_block(ps, "b", cfg, rng);
  std::mt19937_64 g(6);
  Tensor2 x = random_tensor(g, 6, 8), vis = random_tensor(g, 9, 8), txt = random_tensor(g, 4, 8);
  Tensor2 vis_r(9, 8), txt_r(4, 8);
  for (std::size_t r = 0; r < 9; ++r)
    for (std::size_t c = 0; c < 8; ++c) vis_r(r, c) = vis(8 - r, c);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 8; ++c) txt_r(r, c) = txt((r + 1) % 4, c);
  Tape a(&ps), b(&ps);
  auto ya = decoder_block(a, a.constant(x), {a.constant(vis), a.constant(txt)}, block, cfg).value();
  auto yb = decoder_block(b, b.constant(x), {b.constant(vis_r), b.constant(txt_r)}, block, cfg).value();
  CHECK(max_abs_diff(ya, yb) < 1e-12);
}

TEST_CASE("decoder_block: end-to-end gradients, sequential and parallel, no dead parameters") {
  for (bool parallel : {false, true}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng rng(seed);
      ParameterSet ps;
      auto cfg = small_decoder(seed % 2 == 0 ? 1 : 2);
      cfg.parallel_cross = parallel;
      auto block = make_decoder_block(ps, "b", cfg, rng);
      std::mt19937_64 g(seed + 7);
      ps.add("queries", random_tensor(g, 5, 8));
      const ParamId qid = *ps.find("queries");
      Tensor2 vis = random_tensor(g, 6, 8), txt = random_tensor(g, 3, 8), target = random_tensor(g, 5, 8);
      auto build = [&](Tape& t) {
        Var y = decoder_block(t, t.param(qid), {t.constant(vis), t.constant(txt)}, block, cfg);
        return ad::mse(y, t.constant(target));
      };
      auto rep = check_gradients(ps, build, 12);
      CAPTURE(seed);
      CAPTURE(rep.worst_param);
      CHECK(rep.max_rel_error < 1e-4);

      Tape t(&ps);
      auto grads = t.backward(build(t));
      for (std::size_t i = 0; i < ps.size(); ++i) {
        double m = 0.0;
        for (double v : grads[i].values()) m = std::max(m, std::abs(v));
        CAPTURE(ps.name(i));
        CHECK(m > 0.0);
      }
    }
  }
}

TEST_CASE("decode: one block equals decoder_block; deterministic; 12-block budget") {
  Rng rng(8);
  ParameterSet ps;
  DecoderConfig cfg;
  cfg.blocks = 12;
  std::vector<DecoderBlock> blocks;
  for (std::size_t b = 0; b < cfg.blocks; ++b) blocks.push_back(make_decoder_block(ps, "b" + std::to_string(b), cfg, rng));
  std::mt19937_64 g(9);
  Tensor2 q = random_tensor(g, 16, 64, 0.02), vis = random_tensor(g, 64, 64), txt = random_tensor(g, 5, 64);

  Tape a(&ps), b(&ps);
  auto one = decode(a, a.constant(q), {a.constant(vis), a.constant(txt)}, {blocks[0]}, cfg).value();
  CHECK(one == decoder_block(b, b.constant(q), {b.constant(vis), b.constant(txt)}, blocks[0], cfg).value());

  const auto start = std::chrono::steady_clock::now();
  Tape c(&ps);
  auto full = decode(c, c.constant(q), {c.constant(vis), c.constant(txt)}, blocks, cfg).value();
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  Tape d(&ps);
  CHECK(full == decode(d, d.constant(q), {d.constant(vis), d.constant(txt)}, blocks, cfg).value());
  CHECK(full.all_finite());
  MESSAGE("12 blocks, N=16, d=64: " << ms << " ms");
  CHECK(ms < 50.0);
  CHECK_THROWS_AS(decode(d, d.constant(q), {d.constant(vis), d.constant(txt)}, {}, cfg), DimensionError);
}

TEST_CASE("predict_adjacency: symmetric, in (0,1), Gram structure") {
  Rng rng(10);
  ParameterSet ps;
  auto pred = make_mlp2(ps, "p", 8, 8, 4, rng);
  std::mt19937_64 g(11);
  Tape t(&ps);
  auto a = predict_adjacency(t, pred, t.constant(random_tensor(g, 7, 8))).value();
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 7; ++j) {
      CHECK(a(i, j) == a(j, i));
      CHECK(a(i, j) > 0.0);
      CHECK(a(i, j) < 1.0);
    }

  // Orthogonal rows with norm c: identity first layer, second layer maps to
  // scaled standard basis rows.
  ParameterSet ps2;
  Rng rng2(0);
  auto id = make_mlp2(ps2, "p", 3, 3, 3, rng2);
  ps2.value(id.first.w) = Tensor2::identity(3);
  Tensor2 second = Tensor2::identity(3);
  const double c = 1.7;
  for (std::size_t i = 0; i < 3; ++i) second(i, i) = c;
  ps2.value(id.second.w) = second;
  Tape t2(&ps2);
  auto gram = predict_adjacency(t2, id, t2.constant(Tensor2::identity(3))).value();
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(std::abs(gram(i, j) - (i == j ? 1.0 / (1.0 + std::exp(-c * c)) : 0.5)) < 1e-15);
}

TEST_CASE("predict_adjacency: adjacency-loss gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    ParameterSet ps;
    auto pred = make_mlp2(ps, "p", 8, 8, 4, rng);
    std::mt19937_64 g(seed);
    Tensor2 x = random_tensor(g, 6, 8);
    Tensor2 target(6, 6);
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j) target(i, j) = i == j ? 1.0 : std::abs(std::sin(double(i * 7 + j * 7)));
    auto rep = check_gradients(ps, [&](Tape& t) {
      return ad::mse(predict_adjacency(t, pred, t.constant(x)), t.constant(target));
    });
    CAPTURE(seed);
    CHECK(rep.max_rel_error < 1e-4);
  }
}

TEST_CASE("gcn_forward: identity operators, mixing of equal rows, gradients") {
  std::mt19937_64 g(12);
  ParameterSet ps;
  GcnParams gcn{{ps.add("w0", Tensor2::identity(5)), ps.add("w1", Tensor2::identity(5))}};
  Tensor2 q = random_tensor(g, 4, 5);
  Tape t(&ps);
  auto out = gcn_forward(t, t.constant(q), t.constant(Tensor2::identity(4)), gcn).value();
  Tensor2 relu_q = q;
  for (auto& v : relu_q.values()) v = std::max(v, 0.0);
  CHECK(out == relu_q);

  Tensor2 rowc(4, 5);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 5; ++c) rowc(r, c) = double(c) - 1.5;
  ps.value(gcn.weights[0]) = random_tensor(g, 5, 5);
  Tape t2(&ps);
  auto mixed = gcn_forward(t2, t2.constant(rowc), t2.constant(Tensor2(4, 4, 0.25)), gcn).value();
  for (std::size_t r = 1; r < 4; ++r)
    for (std::size_t c = 0; c < 5; ++c) CHECK(mixed(r, c) == mixed(0, c));

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 gs(seed + 50);
    ParameterSet p2;
    GcnParams layers{{p2.add("w0", random_tensor(gs, 5, 5)), p2.add("w1", random_tensor(gs, 5, 5))}};
    auto x = p2.add("x", random_tensor(gs, 4, 5));
    auto adj = p2.add("adj", random_tensor(gs, 4, 4));
    Tensor2 target = random_tensor(gs, 4, 5);
    auto rep = check_gradients(p2, [&](Tape& tt) {
      return ad::mse(gcn_forward(tt, tt.param(x), tt.param(adj), layers), tt.constant(target));
    });
    CAPTURE(seed);
    CHECK(rep.max_rel_error < 1e-4);
  }
  Tape t3(&ps);
  CHECK_THROWS_AS(gcn_forward(t3, t3.constant(q), t3.constant(Tensor2::identity(3)), gcn), DimensionError);
}

namespace {

struct IsgFixture {
  ParameterSet ps;
  IsgConfig cfg;
  IsgParams isg;
  PartAssignment assign{3, {0, 0, 1, 2, 1, 2, 0, 1}};
  Tensor2 q;

  explicit IsgFixture(double alpha, std::uint64_t seed = 13) {
    cfg.d = 8;
    cfg.adjacency_width = 4;
    cfg.alpha = alpha;
    Rng rng(seed);
    isg = make_isg(ps, "isg", cfg, rng);
    std::mt19937_64 g(seed);
    q = random_tensor(g, 8, 8);
  }

  Tensor2 run() {
    Tape t(&ps);
    return isgnet_forward(t, t.constant(q), assign, isg, cfg).q_final.value();
  }
};

}  // namespace

TEST_CASE("isgnet_forward: endpoint identities are bit-exact") {
  IsgFixture one(1.0);
  auto base1 = one.run();
  {
    Tape t(&one.ps);
    Var qtv = t.constant(one.q);
    Var indiv = gcn_forward(t, qtv, predict_adjacency(t, one.isg.indiv_predictor, qtv), one.isg.indiv_gcn);
    CHECK(apply(t, one.isg.fuse_norm, ad::add(indiv, qtv)).value() == base1);
  }
  zero_matching(one.ps, "part_gcn", 3.0);
  zero_matching(one.ps, "part_pred", -2.0);
  CHECK(one.run() == base1);
  zero_matching(one.ps, "indiv_gcn", 0.5);
  CHECK_FALSE(one.run() == base1);

  IsgFixture zero(0.0);
  auto base0 = zero.run();
  zero_matching(zero.ps, "indiv_gcn", 3.0);
  zero_matching(zero.ps, "indiv_pred", -2.0);
  CHECK(zero.run() == base0);
  zero_matching(zero.ps, "part_gcn", 0.5);
  CHECK_FALSE(zero.run() == base0);
}

TEST_CASE("isgnet_forward: default alpha differs from both endpoints; gradients") {
  IsgFixture mid(0.8), lo(0.0), hi(1.0);
  auto m = mid.run();
  CHECK(max_abs_diff(m, lo.run()) > 1e-6);
  CHECK(max_abs_diff(m, hi.run()) > 1e-6);

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    IsgFixture f(0.8, seed);
    auto qid = f.ps.add("q", f.q);
    std::mt19937_64 g(seed + 1);
    Tensor2 target = random_tensor(g, 8, 8);
    Tensor2 ai(8, 8, 0.5), ap(3, 3, 0.25);
    auto rep = check_gradients(f.ps, [&](Tape& t) {
      auto out = isgnet_forward(t, t.param(qid), f.assign, f.isg, f.cfg);
      return ad::add(ad::mse(out.q_final, t.constant(target)),
                     ad::add(ad::mse(out.adj_indiv, t.constant(ai)), ad::mse(out.adj_part, t.constant(ap))));
    }, 16);
    CAPTURE(seed);
    CAPTURE(rep.worst_param);
    CHECK(rep.max_rel_error < 1e-4);
  }
}

TEST_CASE("isgnet_forward: disabled passes queries through; joint permutation equivariance") {
  IsgFixture f(0.8);
  f.cfg.enabled = false;
  Tape t(&f.ps);
  Var q = t.constant(f.q);
  CHECK(isgnet_forward(t, q, f.assign, f.isg, f.cfg).q_final.id() == q.id());

  IsgFixture g(0.8);
  auto base = g.run();
  // Reverse query order together with the assignment.
  Tensor2 qp(8, 8);
  PartAssignment ap{3, std::vector<int>(8)};
  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t c = 0; c < 8; ++c) qp(i, c) = g.q(7 - i, c);
    ap.labels[i] = g.assign.labels[7 - i];
  }
  g.q = qp;
  g.assign = ap;
  auto perm = g.run();
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t c = 0; c < 8; ++c) CHECK(std::abs(perm(i, c) - base(7 - i, c)) < 1e-12);
}

TEST_CASE("latent_head: zero weights, row independence, gradients") {
  Rng rng(14);
  ParameterSet ps;
  auto head = make_latent_head(ps, "head", 8, 5, rng);
  std::mt19937_64 g(15);
  Tensor2 q = random_tensor(g, 6, 8);
  Tensor2 qr(6, 8);
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t c = 0; c < 8; ++c) qr(r, c) = q(5 - r, c);
  Tape t(&ps);
  auto z = latent_head(t, head, t.constant(q)).value();
  auto zr = latent_head(t, head, t.constant(qr)).value();
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t c = 0; c < 5; ++c) CHECK(zr(r, c) == z(5 - r, c));

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng r2(seed);
    ParameterSet p2;
    auto h2 = make_latent_head(p2, "head", 8, 5, r2);
    std::mt19937_64 gs(seed);
    Tensor2 x = random_tensor(gs, 6, 8), target = random_tensor(gs, 6, 5);
    auto rep = check_gradients(p2, [&](Tape& tt) { return ad::l1(latent_head(tt, h2, tt.constant(x)), tt.constant(target)); });
    CAPTURE(seed);
    CHECK(rep.max_rel_error < 1e-4);
  }

  zero_all(ps);
  Tape t0(&ps);
  CHECK(latent_head(t0, head, t0.constant(q)).value() == Tensor2(6, 5));
}

TEST_CASE("visual encoder: bias rows, patch locality, shift covariance, gradients") {
  Rng rng(16);
  ParameterSet ps;
  auto enc = make_visual_encoder(ps, "vis", 32, 8, rng);
  std::mt19937_64 g(17);
  for (auto& v : ps.value(enc.patch.b).values()) v = std::normal_distribution<double>(0, 1)(g);

  SketchRaster blank(32);
  Tape t(&ps);
  auto tok = patch_tokens(t, enc, blank).value();
  REQUIRE(tok.rows() == 16);
  for (std::size_t r = 0; r < 16; ++r)
    for (std::size_t c = 0; c < 8; ++c) CHECK(tok(r, c) == ps.value(enc.patch.b)(0, c));

  SketchRaster a(32);
  std::uniform_real_distribution<double> u(0, 1);
  for (auto& p : a.pixels) p = u(g);
  SketchRaster b = a;
  b.at(13, 21) = 1.0 - a.at(13, 21);  // patch (1, 2) -> token 6
  Tape t2(&ps);
  auto ta = patch_tokens(t2, enc, a).value(), tb = patch_tokens(t2, enc, b).value();
  for (std::size_t r = 0; r < 16; ++r) {
    double diff = 0.0;
    for (std::size_t c = 0; c < 8; ++c) diff = std::max(diff, std::abs(ta(r, c) - tb(r, c)));
    if (r == 6)
      CHECK(diff > 0.0);
    else
      CHECK(diff == 0.0);
  }

  SketchRaster shifted(32);
  for (std::size_t y = 0; y < 32; ++y)
    for (std::size_t x = 8; x < 32; ++x) shifted.at(y, x) = a.at(y, x - 8);
  auto ts = patch_tokens(t2, enc, shifted).value();
  for (std::size_t pr = 0; pr < 4; ++pr)
    for (std::size_t pc = 1; pc < 4; ++pc)
      for (std::size_t c = 0; c < 8; ++c) CHECK(ts(pr * 4 + pc, c) == ta(pr * 4 + pc - 1, c));

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng r2(seed);
    ParameterSet p2;
    auto e2 = make_visual_encoder(p2, "vis", 16, 8, r2);
    SketchRaster img(16);
    std::mt19937_64 gs(seed);
    for (auto& p : img.pixels) p = u(gs);
    Tensor2 target = random_tensor(gs, 4, 8);
    auto rep = check_gradients(p2, [&](Tape& tt) { return ad::mse(encode_sketch(tt, e2, img), tt.constant(target)); }, 16);
    CAPTURE(seed);
    CHECK(rep.max_rel_error < 1e-4);
  }
  ParameterSet p3;
  CHECK_THROWS_AS(make_visual_encoder(p3, "vis", 30, 8, rng), DimensionError);
  Tape t3(&ps);
  CHECK_THROWS_AS(patch_tokens(t3, enc, SketchRaster(20)), DimensionError);
}

TEST_CASE("text projection: gradients") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    ParameterSet ps;
    auto proj = make_text_projection(ps, "txt", 6, 8, rng);
    std::mt19937_64 g(seed);
    Tensor2 tokens = random_tensor(g, 3, 6), target = random_tensor(g, 3, 8);
    auto rep = check_gradients(ps, [&](Tape& t) { return ad::mse(project_text(t, proj, tokens), t.constant(target)); });
    CHECK(rep.max_rel_error < 1e-4);
  }
}
