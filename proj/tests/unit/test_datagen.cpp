#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "partsketch/datagen.hpp"
#include "partsketch/gmm_json.hpp"
#include "partsketch/random.hpp"

using namespace partsketch;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("partsketch_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("templates: sixteen slots in four (three for lamps) contiguous groups") {
  for (Category c : {Category::Chair, Category::Airplane, Category::Lamp}) {
    auto t = shape_template(c);
    std::size_t next = 0;
    for (const auto& g : t.groups) {
      CHECK(g.first == next);
      next += g.count;
    }
    CHECK(next == 16);
  }
  auto chair = shape_template(Category::Chair);
  CHECK(chair.group("legs").count == 5);
  CHECK(chair.group("armrests").first == 12);
  CHECK_THROWS(chair.group("wings"));
}

TEST_CASE("sample_shape: chair consistency with its description") {
  auto tpl = shape_template(Category::Chair);
  int four_leg = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    auto s = sample_shape(tpl, seed);
    const int legs = s.desc.groups[0].count;
    const int arms = s.desc.groups[3].count;
    CHECK(legs >= 3);
    CHECK(legs <= 5);
    for (int k = 0; k < 5; ++k) CHECK((s.shape.parts[k].weight > 0.0) == (k < legs));
    for (int k = 12; k < 16; ++k) CHECK((s.shape.parts[k].weight > 0.0) == (arms > 0));
    if (legs == 4) {
      ++four_leg;
      // Mirror symmetric up to the per-leg jitter.
      Vec3 c = Vec3::Zero();
      for (int k = 0; k < 4; ++k) c += s.shape.parts[k].mu / 4.0;
      CHECK(std::abs(c.x()) < 0.016);
      CHECK(std::abs(c.z()) < 0.016);
      CHECK(std::abs(s.shape.parts[0].mu.x() + s.shape.parts[3].mu.x()) < 0.031);
    }
  }
  CHECK(four_leg > 20);
  CHECK(shape_to_json(sample_shape(tpl, 42).shape).dump() == shape_to_json(sample_shape(tpl, 42).shape).dump());
}

TEST_CASE("sample_shape: 1000 samples per category stay in range") {
  for (Category c : {Category::Chair, Category::Airplane, Category::Lamp}) {
    auto tpl = shape_template(c);
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      auto s = sample_shape(tpl, mix_seed(99, seed));
      REQUIRE(s.shape.size() == 16);
      for (const auto& p : s.shape.parts) {
        CHECK(p.mu.cwiseAbs().maxCoeff() <= 1.0);
        CHECK(p.scales.minCoeff() >= tpl.min_scale);
        CHECK(p.scales.maxCoeff() <= tpl.max_scale);
      }
    }
  }
}

TEST_CASE("latent codec: basis, exact round trip, zero latent, projection fixed point") {
  LatentCodec codec(32);
  const Eigen::MatrixXd gram = codec.basis().transpose() * codec.basis();
  CHECK((gram - Eigen::MatrixXd::Identity(10, 10)).cwiseAbs().maxCoeff() < 1e-12);

  auto tpl = shape_template(Category::Chair);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto s = sample_shape(tpl, seed).shape;
    auto back = codec.decode(codec.latent_of(s));
    for (std::size_t i = 0; i < s.size(); ++i) {
      CHECK((back.parts[i].mu - s.parts[i].mu).cwiseAbs().maxCoeff() < 1e-9);
      CHECK((back.parts[i].axes - s.parts[i].axes).cwiseAbs().maxCoeff() < 1e-9);
      CHECK((back.parts[i].scales - s.parts[i].scales).cwiseAbs().maxCoeff() < 1e-9);
      CHECK(std::abs(back.parts[i].weight - s.parts[i].weight) < 1e-9);
    }
  }

  auto origin = codec.decode(Tensor2(1, 32));
  CHECK(origin.parts[0].mu == Vec3::Zero());
  CHECK(origin.parts[0].axes == Mat3::Identity());
  CHECK((origin.parts[0].scales - Vec3::Constant(kScaleBaseline)).norm() < 1e-15);
  CHECK(origin.parts[0].weight == 0.5);

  Rng rng(3);
  Tensor2 z(4, 32);
  for (auto& v : z.values()) v = 0.08 * rng.normal();
  const Tensor2 once = codec.latent_of(codec.decode(z));
  // Oracle: orthogonal projection B B^T z.
  const Eigen::MatrixXd proj = codec.basis() * codec.basis().transpose();
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 32; ++c) {
      double expected = 0.0;
      for (std::size_t k = 0; k < 32; ++k) expected += proj(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k)) * z(r, k);
      CHECK(std::abs(once(r, c) - expected) < 1e-9);
    }
  CHECK(max_abs_diff(codec.latent_of(codec.decode(once)), once) < 1e-9);
  CHECK_THROWS_AS(codec.decode(Tensor2(2, 31)), DimensionError);
}

TEST_CASE("render_silhouette: matches a ray-marching oracle") {
  auto s = sample_shape(shape_template(Category::Chair), 5).shape;
  RenderOptions opt;
  opt.side = 32;
  for (View v : {View::Front, View::Side, View::ThreeQuarter}) {
    auto img = render_silhouette(s, v, opt);
    const Mat3 f = view_frame(v);
    CHECK((f * f.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    std::size_t disagree = 0, filled = 0;
    for (std::size_t r = 0; r < 32; ++r)
      for (std::size_t c = 0; c < 32; ++c) {
        const double px = 2.4 / 32.0;
        Vec3 o = (-1.2 + (c + 0.5) * px) * Vec3(f.row(0)) + (1.2 - (r + 0.5) * px) * Vec3(f.row(1));
        double best = 0.0;
        for (int k = -800; k <= 800; ++k) best = std::max(best, occupancy(s, o + (k * 0.0025) * Vec3(f.row(2))));
        const bool in = best >= 0.5;
        filled += in ? 1 : 0;
        // Marching can only underestimate the maximum.
        if (in && img.at(r, c) == 0.0) ++disagree;
        if (!in && img.at(r, c) == 1.0 && best < 0.49) ++disagree;
      }
    CAPTURE(to_string(v));
    CHECK(disagree == 0);
    CHECK(filled > 20);
  }
}

TEST_CASE("render_sketch: blank shape, pure edge map, leg count visible") {
  auto s = sample_shape(shape_template(Category::Chair), 8).shape;
  auto empty = s;
  for (auto& p : empty.parts) p.weight = 0.0;
  auto blank = render_sketch(empty, View::Front, 1);
  CHECK(std::all_of(blank.pixels.begin(), blank.pixels.end(), [](double v) { return v == 0.0; }));

  RenderOptions still;
  still.jitter = 0.0;
  auto sil = render_silhouette(s, View::ThreeQuarter, still);
  auto edges = render_sketch(s, View::ThreeQuarter, 123, still);
  CHECK(edges == render_sketch(s, View::ThreeQuarter, 456, still));
  for (std::size_t r = 0; r < 64; ++r)
    for (std::size_t c = 0; c < 64; ++c) {
      bool boundary = false;
      if (sil.at(r, c) == 1.0) {
        boundary = r == 0 || c == 0 || r == 63 || c == 63 || sil.at(r - 1, c) == 0.0 || sil.at(r + 1, c) == 0.0 ||
                   sil.at(r, c - 1) == 0.0 || sil.at(r, c + 1) == 0.0;
      }
      CHECK((edges.at(r, c) == 1.0) == boundary);
    }
  CHECK(render_sketch(s, View::Front, 1) == render_sketch(s, View::Front, 1));

  // Same seed, one leg removed from a four-leg chair.
  for (std::uint64_t seed = 0;; ++seed) {
    auto c = sample_shape(shape_template(Category::Chair), seed);
    if (c.desc.groups[0].count != 4) continue;
    auto three = c.shape;
    three.parts[0].weight = 0.0;
    CHECK_FALSE(render_sketch(c.shape, View::Front, 7) == render_sketch(three, View::Front, 7));
    break;
  }
}

TEST_CASE("dataset: files, manifest determinism, read back") {
  DatasetConfig cfg;
  cfg.count = 5;
  cfg.seed = 77;
  auto a = scratch_dir("ds_a"), b = scratch_dir("ds_b");
  write_dataset(a.string(), cfg);
  write_dataset(b.string(), read_manifest(a.string()));
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    ++files;
    CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
  }
  CHECK(files == 1 + 4 * 5);
  for (const char* ext : {".gmm.json", ".sketch.png", ".desc.json", ".z.bin"}) CHECK(fs::exists(a / ("0003" + std::string(ext))));

  auto ds = read_dataset(a.string());
  auto mem = make_dataset(cfg);
  REQUIRE(ds.samples.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(ds.samples[i].sketch == mem[i].sketch);
    CHECK(ds.samples[i].desc == mem[i].desc);
    CHECK(max_abs_diff(ds.samples[i].shape.latents, mem[i].shape.latents) < 1e-6);
    CHECK(ds.samples[i].entry.view == mem[i].entry.view);
  }
  CHECK(ds.samples[1].entry.view == View::Side);
  fs::remove_all(a);
  fs::remove_all(b);
}
