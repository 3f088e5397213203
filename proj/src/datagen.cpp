#include "partsketch/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <stdexcept>

#include "partsketch/flat_binary.hpp"
#include "partsketch/gmm_json.hpp"
#include "partsketch/random.hpp"

namespace partsketch {

namespace fs = std::filesystem;
using nlohmann::json;

Category parse_category(const std::string& s) {
  if (s == "chair") return Category::Chair;
  if (s == "airplane") return Category::Airplane;
  if (s == "lamp") return Category::Lamp;
  throw std::invalid_argument("unknown category '" + s + "'");
}

std::string to_string(Category c) {
  switch (c) {
    case Category::Chair: return "chair";
    case Category::Airplane: return "airplane";
    case Category::Lamp: return "lamp";
  }
  return "?";
}

const SlotGroup& ShapeTemplate::group(const std::string& name) const {
  for (const auto& g : groups)
    if (g.name == name) return g;
  throw std::invalid_argument("template has no group '" + name + "'");
}

ShapeTemplate shape_template(Category c) {
  ShapeTemplate t;
  t.category = c;
  switch (c) {
    case Category::Chair: t.groups = {{"legs", 0, 5}, {"seat", 5, 3}, {"backrest", 8, 4}, {"armrests", 12, 4}}; break;
    case Category::Airplane: t.groups = {{"wings", 0, 6}, {"fuselage", 6, 4}, {"tail", 10, 3}, {"engines", 13, 3}}; break;
    case Category::Lamp: t.groups = {{"base", 0, 4}, {"stem", 4, 6}, {"head", 10, 6}}; break;
  }
  return t;
}

namespace {

GaussianPart part(const Vec3& mu, const Vec3& scales, double weight = 1.0, const Mat3& axes = Mat3::Identity()) {
  GaussianPart p;
  p.mu = mu;
  p.axes = axes;
  p.scales = scales;
  p.weight = weight;
  return p;
}

Mat3 rot(const Vec3& axis, double angle) { return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix(); }

constexpr double kCornerInset = 0.8;

Vec3 jitter3(Rng& rng, double a) { return {rng.uniform(-a, a), rng.uniform(-a, a), rng.uniform(-a, a)}; }

ShapeSample sample_chair(Rng& rng) {
  ShapeSample s;
  auto& P = s.shape.parts;
  const double half_w = rng.uniform(0.36, 0.44);
  const double half_d = rng.uniform(0.34, 0.42);
  const double seat_y = rng.uniform(-0.04, 0.04);
  const double bottom = -0.95;
  const int legs = static_cast<int>(rng.integer(3, 5));
  const bool splayed = rng.uniform() < 0.5;
  const bool round_seat = rng.uniform() < 0.5;
  const bool tall_back = rng.uniform() < 0.5;
  const bool arms = rng.uniform() < 0.5;

  // Legs: one Gaussian per leg spanning bottom..seat; spare slots sit at the
  // centre of the leg ring with weight 0.
  const double leg_y = 0.5 * (seat_y + bottom);
  const double half_len = 0.5 * (seat_y - bottom);
  const double thick = rng.uniform(0.035, 0.05);
  const double ring = rng.uniform(0.2, 0.25);
  std::vector<Vec3> feet;
  if (legs == 4) {
    for (double sx : {-1.0, 1.0})
      for (double sz : {-1.0, 1.0}) feet.push_back({sx * ring * kCornerInset, leg_y, sz * ring * kCornerInset});
  } else {
    const double phase = legs == 3 ? std::numbers::pi / 2 : 0.0;
    for (int k = 0; k < legs; ++k) {
      const double a = phase + 2.0 * std::numbers::pi * k / legs;
      feet.push_back({ring * std::cos(a), leg_y, ring * std::sin(a)});
    }
  }
  for (int k = 0; k < 5; ++k) {
    if (k < legs) {
      Vec3 mu = feet[static_cast<std::size_t>(k)] + Vec3(rng.uniform(-0.015, 0.015), 0.0, rng.uniform(-0.015, 0.015));
      Mat3 axes = Mat3::Identity();
      if (splayed) {
        Vec3 out(mu.x(), 0.0, mu.z());
        axes = rot(Vec3(0, 1, 0).cross(out), -0.18);
      }
      P.push_back(part(mu, {thick, half_len / 1.1, thick}, 1.0, axes));
    } else {
      P.push_back(part({0.0, leg_y, 0.0}, {thick, half_len / 1.1, thick}, 0.0));
    }
  }

  // Seat: three slabs across x.
  const double slab = half_w / 3.0;
  for (int k = -1; k <= 1; ++k) {
    const double zs = round_seat && k != 0 ? 0.72 * half_d : half_d;
    P.push_back(part({2.0 * slab * k, seat_y, 0.0}, {slab * 1.15, 0.045, zs / 1.1}));
  }

  // Backrest: 2 x 2 panel at the rear edge.
  const double back_z = -half_d + 0.03;
  const double y0 = seat_y + (tall_back ? 0.22 : 0.16);
  const double y1 = seat_y + (tall_back ? 0.58 : 0.4);
  const double ys = tall_back ? 0.16 : 0.11;
  for (double sx : {-1.0, 1.0})
    for (double y : {y0, y1}) P.push_back(part({sx * half_w * 0.5, y, back_z}, {half_w * 0.5, ys, 0.035}));

  // Armrests: two Gaussians per side.
  for (double sx : {-1.0, 1.0})
    for (double sz : {-1.0, 1.0})
      P.push_back(part({sx * (half_w + 0.02), seat_y + 0.22, sz * 0.45 * half_d}, {0.035, 0.035, 0.5 * half_d},
                       arms ? 1.0 : 0.0));

  s.desc.category = "chair";
  s.desc.groups = {{"legs", legs, splayed ? "splayed" : "straight"},
                   {"seat", 1, round_seat ? "round" : "square"},
                   {"backrest", 1, tall_back ? "tall" : "short"},
                   {"armrests", arms ? 2 : 0, "straight"}};
  return s;
}

ShapeSample sample_airplane(Rng& rng) {
  ShapeSample s;
  auto& P = s.shape.parts;
  const bool swept = rng.uniform() < 0.5;
  const bool long_body = rng.uniform() < 0.5;
  const int engines = static_cast<int>(rng.integer(2, 3));
  const double span = rng.uniform(0.75, 0.9);
  const double body = long_body ? 0.85 : 0.65;
  const double sweep = swept ? 0.45 : 0.05;

  for (double sx : {-1.0, 1.0})
    for (int k = 1; k <= 3; ++k) {
      const double x = sx * span * k / 3.0;
      P.push_back(part({x, 0.0, 0.05 - sweep * std::abs(x)}, {span / 6.0 * 1.1, 0.025, 0.12 - 0.02 * k}));
    }
  for (int k = 0; k < 4; ++k) {
    const double z = -body + (k + 0.5) * (2.0 * body / 4.0);
    P.push_back(part({0.0, 0.02, z}, {0.085, 0.085, body / 4.0 * 1.1}));
  }
  P.push_back(part({0.0, 0.16, -body + 0.06}, {0.02, 0.13, 0.08}));
  P.push_back(part({-0.17, 0.04, -body + 0.04}, {0.12, 0.02, 0.06}));
  P.push_back(part({0.17, 0.04, -body + 0.04}, {0.12, 0.02, 0.06}));
  for (double sx : {-1.0, 1.0}) {
    const double x = sx * span * 0.4;
    P.push_back(part({x, -0.09, 0.12 - sweep * std::abs(x)}, {0.045, 0.045, 0.11}));
  }
  P.push_back(part({0.0, 0.14, -body + 0.25}, {0.045, 0.045, 0.1}, engines == 3 ? 1.0 : 0.0));
  for (auto& p : P) p.mu += jitter3(rng, 0.01);

  s.desc.category = "airplane";
  s.desc.groups = {{"wings", 2, swept ? "swept" : "straight"},
                   {"fuselage", 1, long_body ? "long" : "short"},
                   {"tail", 1, "standard"},
                   {"engines", engines, "jet"}};
  return s;
}

ShapeSample sample_lamp(Rng& rng) {
  ShapeSample s;
  auto& P = s.shape.parts;
  const bool round_base = rng.uniform() < 0.5;
  const bool bent = rng.uniform() < 0.5;
  const int heads = static_cast<int>(rng.integer(1, 2));
  const bool cone = rng.uniform() < 0.5;

  for (double sx : {-1.0, 1.0})
    for (double sz : {-1.0, 1.0}) {
      const double r = round_base ? 0.12 : 0.15;
      P.push_back(part({sx * r, -0.9, sz * r}, {round_base ? 0.13 : 0.15, 0.035, round_base ? 0.13 : 0.15}));
    }
  Vec3 top;
  for (int k = 0; k < 6; ++k) {
    const double t = (k + 0.5) / 6.0;
    const double y = -0.85 + t * 1.25;
    const double x = bent ? 0.3 * t * t : 0.0;
    top = {x, y, 0.0};
    P.push_back(part(top, {0.03, 1.25 / 12.0 * 1.15, 0.03}));
  }
  for (int h = 0; h < 2; ++h) {
    const double side = h == 0 ? 1.0 : -1.0;
    const double on = h < heads ? 1.0 : 0.0;
    const Vec3 base = top + Vec3(side * 0.18, 0.05, 0.0);
    for (int k = 0; k < 3; ++k) {
      const double widen = cone ? 0.05 + 0.05 * k : 0.11;
      P.push_back(part(base + Vec3(side * 0.02 * k, -0.07 * k, 0.0), {widen, 0.05, widen}, on));
    }
  }
  for (auto& p : P) p.mu += jitter3(rng, 0.01);

  s.desc.category = "lamp";
  s.desc.groups = {{"base", 1, round_base ? "round" : "square"},
                   {"stem", 1, bent ? "bent" : "straight"},
                   {"head", heads, cone ? "cone" : "dome"}};
  return s;
}

}  // namespace

ShapeSample sample_shape(const ShapeTemplate& tpl, std::uint64_t seed) {
  Rng rng(seed);
  ShapeSample s;
  switch (tpl.category) {
    case Category::Chair: s = sample_chair(rng); break;
    case Category::Airplane: s = sample_airplane(rng); break;
    case Category::Lamp: s = sample_lamp(rng); break;
  }
  validate(s.shape);
  return s;
}

LatentCodec::LatentCodec(std::size_t width, std::uint64_t seed) : width_(width) {
  if (width < kThetaWidth) throw DimensionError("latent width must be at least 10");
  Rng rng(seed);
  Eigen::MatrixXd g(width, kThetaWidth);
  for (Eigen::Index c = 0; c < g.cols(); ++c)
    for (Eigen::Index r = 0; r < g.rows(); ++r) g(r, c) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  basis_ = qr.householderQ() * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(width), kThetaWidth);
}

Eigen::Matrix<double, kThetaWidth, 1> LatentCodec::pack(const GaussianPart& p) {
  Eigen::Matrix<double, kThetaWidth, 1> th;
  Eigen::AngleAxisd aa(p.axes);
  const Vec3 rv = aa.angle() * aa.axis();
  th << p.mu, rv, (p.scales / kScaleBaseline).array().log().matrix(), 2.0 * p.weight - 1.0;
  return th;
}

GaussianPart LatentCodec::unpack(const Eigen::Matrix<double, kThetaWidth, 1>& th) {
  GaussianPart p;
  p.mu = th.head<3>().cwiseMax(-kMeanBound).cwiseMin(kMeanBound);
  const Vec3 rv = th.segment<3>(3);
  const double angle = rv.norm();
  p.axes = angle > 0.0 ? Mat3(Eigen::AngleAxisd(angle, rv / angle)) : Mat3::Identity();
  p.scales = kScaleBaseline * th.segment<3>(6).array().cwiseMin(30.0).exp().matrix();
  p.weight = std::clamp(0.5 * (th[9] + 1.0), 0.0, 1.0);
  return p;
}

Tensor2 LatentCodec::latent_of(const ShapeGMM& shape) const {
  Tensor2 z(shape.size(), width_);
  for (std::size_t i = 0; i < shape.size(); ++i) {
    const Eigen::VectorXd row = basis_ * pack(shape.parts[i]);
    for (std::size_t c = 0; c < width_; ++c) z(i, c) = row[static_cast<Eigen::Index>(c)];
  }
  return z;
}

ShapeGMM LatentCodec::decode(const Tensor2& z) const {
  if (z.cols() != width_) throw DimensionError("decode: latent width " + std::to_string(z.cols()) + " vs codec " + std::to_string(width_));
  if (!z.all_finite()) throw ShapeError("decode: non-finite latent");
  ShapeGMM s;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    Eigen::VectorXd row(static_cast<Eigen::Index>(width_));
    for (std::size_t c = 0; c < width_; ++c) row[static_cast<Eigen::Index>(c)] = z(i, c);
    s.parts.push_back(unpack(basis_.transpose() * row));
  }
  s.latents = z;
  return s;
}

View parse_view(const std::string& s) {
  if (s == "front") return View::Front;
  if (s == "side") return View::Side;
  if (s == "three-quarter") return View::ThreeQuarter;
  throw std::invalid_argument("unknown view '" + s + "'");
}

std::string to_string(View v) {
  switch (v) {
    case View::Front: return "front";
    case View::Side: return "side";
    case View::ThreeQuarter: return "three-quarter";
  }
  return "?";
}

Mat3 view_frame(View v) {
  Mat3 cam = Mat3::Identity();
  if (v == View::Side) cam = rot({0, 1, 0}, std::numbers::pi / 2);
  if (v == View::ThreeQuarter) cam = rot({0, 1, 0}, std::numbers::pi / 4) * rot({1, 0, 0}, -0.35);
  Mat3 f;
  f.row(0) = (cam * Vec3(1, 0, 0)).transpose();
  f.row(1) = (cam * Vec3(0, 1, 0)).transpose();
  f.row(2) = (cam * Vec3(0, 0, -1)).transpose();
  return f;
}

SketchRaster render_silhouette(const ShapeGMM& shape, View view, const RenderOptions& opt) {
  const Mat3 f = view_frame(view);
  const Vec3 right = f.row(0), up = f.row(1), dir = f.row(2);
  struct Ray {
    Mat3 prec;
    Vec3 mu;
    double weight, vpv;
    Vec3 pv;
  };
  std::vector<Ray> parts;
  for (const auto& p : shape.parts) {
    if (!p.active()) continue;
    Ray r;
    r.prec = p.axes * p.scales.cwiseInverse().cwiseAbs2().asDiagonal() * p.axes.transpose();
    r.mu = p.mu;
    r.weight = p.weight;
    r.pv = r.prec * dir;
    r.vpv = dir.dot(r.pv);
    parts.push_back(r);
  }
  SketchRaster img(opt.side);
  const double px = 2.0 * opt.extent / static_cast<double>(opt.side);
  for (std::size_t row = 0; row < opt.side; ++row)
    for (std::size_t col = 0; col < opt.side; ++col) {
      const double u = -opt.extent + (static_cast<double>(col) + 0.5) * px;
      const double v = opt.extent - (static_cast<double>(row) + 0.5) * px;
      const Vec3 o = u * right + v * up;
      double best = 0.0;
      for (const auto& r : parts) {
        // Smallest Mahalanobis distance along the ray through o.
        const Vec3 d = o - r.mu;
        const double m2 = d.dot(r.prec * d) - std::pow(d.dot(r.pv), 2) / r.vpv;
        if (m2 > 2.0 * kernels::kSupportRadius * kernels::kSupportRadius) continue;
        best = std::max(best, r.weight * std::exp(-0.5 * std::max(m2, 0.0)));
      }
      img.at(row, col) = best >= 0.5 ? 1.0 : 0.0;
    }
  return img;
}

SketchRaster render_sketch(const ShapeGMM& shape, View view, std::uint64_t seed, const RenderOptions& opt) {
  const SketchRaster sil = render_silhouette(shape, view, opt);
  const std::size_t n = opt.side;
  auto inside = [&](long r, long c) {
    return r >= 0 && c >= 0 && r < static_cast<long>(n) && c < static_cast<long>(n) &&
           sil.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) > 0.5;
  };
  Rng rng(seed);
  const double fx1 = rng.uniform(0.5, 2.0), fy1 = rng.uniform(0.5, 2.0), ph1 = rng.uniform(0, 2 * std::numbers::pi);
  const double fx2 = rng.uniform(0.5, 2.0), fy2 = rng.uniform(0.5, 2.0), ph2 = rng.uniform(0, 2 * std::numbers::pi);
  const double w = 2.0 * std::numbers::pi / static_cast<double>(n);

  SketchRaster out(n);
  for (long r = 0; r < static_cast<long>(n); ++r)
    for (long c = 0; c < static_cast<long>(n); ++c) {
      if (!inside(r, c)) continue;
      if (inside(r - 1, c) && inside(r + 1, c) && inside(r, c - 1) && inside(r, c + 1)) continue;
      long rr = r, cc = c;
      if (opt.jitter > 0.0) {
        cc += std::lround(opt.jitter * std::sin(w * (fx1 * c + fy1 * r) + ph1));
        rr += std::lround(opt.jitter * std::sin(w * (fx2 * c + fy2 * r) + ph2));
      }
      if (rr >= 0 && cc >= 0 && rr < static_cast<long>(n) && cc < static_cast<long>(n))
        out.at(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc)) = 1.0;
    }
  return out;
}

std::string sample_stem(std::size_t index) {
  std::string s = std::to_string(index);
  return std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s;
}

DatasetEntry dataset_entry(const DatasetConfig& cfg, std::size_t index) {
  if (cfg.views.empty()) throw std::invalid_argument("dataset needs at least one view");
  return {index, mix_seed(cfg.seed, index), cfg.views[index % cfg.views.size()]};
}

Sample make_sample(const DatasetConfig& cfg, std::size_t index) {
  Sample s;
  s.entry = dataset_entry(cfg, index);
  auto drawn = sample_shape(shape_template(cfg.category), s.entry.seed);
  s.shape = std::move(drawn.shape);
  s.desc = std::move(drawn.desc);
  s.shape.latents = LatentCodec(cfg.latent_width).latent_of(s.shape);
  s.sketch = render_sketch(s.shape, s.entry.view, mix_seed(s.entry.seed, 1), cfg.render);
  return s;
}

std::vector<Sample> make_dataset(const DatasetConfig& cfg) {
  std::vector<Sample> out(cfg.count);
#pragma omp parallel for schedule(dynamic) if (cfg.count > 16)
  for (std::size_t i = 0; i < cfg.count; ++i) out[i] = make_sample(cfg, i);
  return out;
}

namespace {

json manifest_json(const DatasetConfig& cfg) {
  json views = json::array();
  for (View v : cfg.views) views.push_back(to_string(v));
  json entries = json::array();
  for (std::size_t i = 0; i < cfg.count; ++i) {
    auto e = dataset_entry(cfg, i);
    entries.push_back({{"index", e.index}, {"seed", e.seed}, {"view", to_string(e.view)}, {"stem", sample_stem(i)}});
  }
  return {{"version", 1},
          {"category", to_string(cfg.category)},
          {"count", cfg.count},
          {"seed", cfg.seed},
          {"views", views},
          {"render", {{"side", cfg.render.side}, {"extent", cfg.render.extent}, {"jitter", cfg.render.jitter}}},
          {"latent_width", cfg.latent_width},
          {"entries", entries}};
}

}  // namespace

void write_dataset(const std::string& dir, const DatasetConfig& cfg) {
  fs::create_directories(dir);
  write_text_file((fs::path(dir) / "manifest.json").string(), manifest_json(cfg).dump(2) + "\n");
  auto samples = make_dataset(cfg);
  for (const auto& s : samples) {
    const fs::path stem = fs::path(dir) / sample_stem(s.entry.index);
    save_shape(stem.string() + ".gmm.json", s.shape);
    write_png(stem.string() + ".sketch.png", s.sketch);
    write_text_file(stem.string() + ".desc.json", desc_to_json(s.desc).dump(2) + "\n");
    save_flat(stem.string() + ".z.bin", s.shape.latents);
  }
}

DatasetConfig read_manifest(const std::string& dir) {
  const json m = json::parse(read_text_file((fs::path(dir) / "manifest.json").string()));
  if (m.value("version", 0) != 1) throw std::runtime_error("manifest: unsupported version");
  DatasetConfig cfg;
  cfg.category = parse_category(m.at("category").get<std::string>());
  cfg.count = m.at("count").get<std::size_t>();
  cfg.seed = m.at("seed").get<std::uint64_t>();
  cfg.views.clear();
  for (const auto& v : m.at("views")) cfg.views.push_back(parse_view(v.get<std::string>()));
  cfg.render.side = m.at("render").at("side").get<std::size_t>();
  cfg.render.extent = m.at("render").at("extent").get<double>();
  cfg.render.jitter = m.at("render").at("jitter").get<double>();
  cfg.latent_width = m.at("latent_width").get<std::size_t>();
  return cfg;
}

Dataset read_dataset(const std::string& dir) {
  Dataset ds;
  ds.config = read_manifest(dir);
  for (std::size_t i = 0; i < ds.config.count; ++i) {
    Sample s;
    s.entry = dataset_entry(ds.config, i);
    const std::string stem = (fs::path(dir) / sample_stem(i)).string();
    s.shape = load_shape(stem + ".gmm.json");
    s.sketch = read_png(stem + ".sketch.png");
    s.desc = desc_from_json(json::parse(read_text_file(stem + ".desc.json")));
    s.shape.latents = load_flat(stem + ".z.bin");
    if (s.shape.latents.rows() != s.shape.size() || s.shape.latents.cols() != ds.config.latent_width)
      throw DimensionError("sample " + sample_stem(i) + ": latent shape " + s.shape.latents.shape_string());
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace partsketch
