#include "partsketch/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <numeric>

#include "partsketch/kernels.hpp"
#include "partsketch/random.hpp"

namespace partsketch {

namespace {

std::vector<kernels::Point3> to_points(const PointSet& s) {
  std::vector<kernels::Point3> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = {s[i].x(), s[i].y(), s[i].z()};
  return out;
}

double mean_nearest(const std::vector<kernels::Point3>& from, const std::vector<kernels::Point3>& to) {
  std::vector<double> d(from.size());
  kernels::nearest_sq_dist(from, to, d);
  double s = 0.0;
  for (double v : d) s += v;
  return s / static_cast<double>(from.size());
}

}  // namespace

double chamfer(const PointSet& p, const PointSet& g) {
  if (p.empty() || g.empty()) throw MetricError("chamfer: empty point set");
  const auto a = to_points(p), b = to_points(g);
  return mean_nearest(a, b) + mean_nearest(b, a);
}

// Shortest augmenting path (Jonker-Volgenant style potentials), O(n^3).
std::vector<std::size_t> optimal_assignment(const PointSet& p, const PointSet& g) {
  const std::size_t n = p.size();
  if (n != g.size()) throw MetricError("emd: point sets differ in size (" + std::to_string(n) + " vs " +
                                       std::to_string(g.size()) + ")");
  if (n == 0) throw MetricError("emd: empty point set");
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based rows/cols; column 0 is the virtual start.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = (p[i0 - 1] - g[j - 1]).norm() - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<std::size_t> perm(n);
  for (std::size_t j = 1; j <= n; ++j) perm[match[j] - 1] = j - 1;
  return perm;
}

double emd(const PointSet& p, const PointSet& g) {
  const auto perm = optimal_assignment(p, g);
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - g[perm[i]]).norm();
  return s / static_cast<double>(p.size());
}

std::vector<Vec3> fid_view_directions(std::size_t views) {
  std::vector<Vec3> out;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < views; ++i) {
    const double y = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(views);
    const double r = std::sqrt(1.0 - y * y);
    const double th = golden * static_cast<double>(i);
    out.emplace_back(r * std::cos(th), y, r * std::sin(th));
  }
  return out;
}

namespace {

// Camera basis: rows are right, up, toward-viewer.
Mat3 camera_frame(const Vec3& dir) {
  const Vec3 f = dir.normalized();
  const Vec3 helper = std::abs(f.y()) > 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 right = helper.cross(f).normalized();
  const Vec3 up = f.cross(right);
  Mat3 m;
  m.row(0) = right.transpose();
  m.row(1) = up.transpose();
  m.row(2) = f.transpose();
  return m;
}

}  // namespace

Image render_shaded(const TriMesh& mesh, const Vec3& view_dir, std::size_t side) {
  constexpr double kExtent = 1.2;
  const Mat3 cam = camera_frame(view_dir);
  const Vec3 light = Vec3(0.3, 0.5, 1.0).normalized();  // camera frame
  Image img = Image::Zero(static_cast<Eigen::Index>(side), static_cast<Eigen::Index>(side));
  Eigen::MatrixXd depth = Eigen::MatrixXd::Constant(img.rows(), img.cols(), -std::numeric_limits<double>::infinity());
  std::vector<Vec3> v(mesh.vertices.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = cam * mesh.vertices[i];
  const double px = 2.0 * kExtent / static_cast<double>(side);
  auto to_px = [&](double c) { return (c + kExtent) / px - 0.5; };
  for (const auto& tri : mesh.triangles) {
    const Vec3 &a = v[tri[0]], &b = v[tri[1]], &c = v[tri[2]];
    const Vec3 n = (b - a).cross(c - a);
    if (n.norm() == 0.0) continue;
    const double shade = std::abs(n.normalized().dot(light));
    const double ax = to_px(a.x()), ay = to_px(a.y()), bx = to_px(b.x()), by = to_px(b.y()), cx = to_px(c.x()),
                 cy = to_px(c.y());
    const double area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
    if (area == 0.0) continue;
    const auto lo_x = static_cast<long>(std::max(0.0, std::ceil(std::min({ax, bx, cx}))));
    const auto hi_x = static_cast<long>(std::min(static_cast<double>(side) - 1, std::floor(std::max({ax, bx, cx}))));
    const auto lo_y = static_cast<long>(std::max(0.0, std::ceil(std::min({ay, by, cy}))));
    const auto hi_y = static_cast<long>(std::min(static_cast<double>(side) - 1, std::floor(std::max({ay, by, cy}))));
    for (long iy = lo_y; iy <= hi_y; ++iy) {
      for (long ix = lo_x; ix <= hi_x; ++ix) {
        const double x = static_cast<double>(ix), y = static_cast<double>(iy);
        const double w0 = ((bx - x) * (cy - y) - (by - y) * (cx - x)) / area;
        const double w1 = ((cx - x) * (ay - y) - (cy - y) * (ax - x)) / area;
        const double w2 = 1.0 - w0 - w1;
        if (w0 < 0 || w1 < 0 || w2 < 0) continue;
        const double z = w0 * a.z() + w1 * b.z() + w2 * c.z();
        const auto row = static_cast<Eigen::Index>(side - 1 - static_cast<std::size_t>(iy));
        if (z > depth(row, ix)) {
          depth(row, ix) = z;
          img(row, ix) = shade;
        }
      }
    }
  }
  return img;
}

namespace {

struct ConvLayer {
  std::size_t in, out;
  std::vector<double> w;  // out x in x 3 x 3
  std::vector<double> b;
};

ConvLayer make_conv(Rng& rng, std::size_t in, std::size_t out) {
  ConvLayer l{in, out, std::vector<double>(out * in * 9), std::vector<double>(out)};
  const double std = 1.0 / std::sqrt(static_cast<double>(in * 9));
  for (auto& x : l.w) x = rng.normal() * std;
  for (auto& x : l.b) x = rng.normal() * 0.1;
  return l;
}

// Stride-2, zero padding 1, tanh. Input/output laid out channel-major.
std::vector<double> conv_forward(const ConvLayer& l, const std::vector<double>& x, std::size_t side) {
  const std::size_t os = side / 2;
  std::vector<double> y(l.out * os * os);
  for (std::size_t o = 0; o < l.out; ++o)
    for (std::size_t r = 0; r < os; ++r)
      for (std::size_t c = 0; c < os; ++c) {
        double s = l.b[o];
        for (std::size_t i = 0; i < l.in; ++i)
          for (int dr = -1; dr <= 1; ++dr)
            for (int dc = -1; dc <= 1; ++dc) {
              const long rr = static_cast<long>(2 * r) + dr, cc = static_cast<long>(2 * c) + dc;
              if (rr < 0 || cc < 0 || rr >= static_cast<long>(side) || cc >= static_cast<long>(side)) continue;
              s += l.w[((o * l.in + i) * 3 + static_cast<std::size_t>(dr + 1)) * 3 + static_cast<std::size_t>(dc + 1)] *
                   x[(i * side + static_cast<std::size_t>(rr)) * side + static_cast<std::size_t>(cc)];
            }
        y[(o * os + r) * os + c] = std::tanh(s);
      }
  return y;
}

}  // namespace

Featurizer conv_featurizer(std::uint64_t seed) {
  Rng rng(seed);
  auto l1 = std::make_shared<ConvLayer>(make_conv(rng, 1, 16));
  auto l2 = std::make_shared<ConvLayer>(make_conv(rng, 16, kFidFeatures));
  return [l1, l2](const Image& img) {
    const auto side = static_cast<std::size_t>(img.rows());
    if (img.cols() != img.rows() || side % 4 != 0) throw MetricError("conv featurizer: image must be square, side % 4 == 0");
    std::vector<double> x(side * side);
    for (std::size_t r = 0; r < side; ++r)
      for (std::size_t c = 0; c < side; ++c) x[r * side + c] = img(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    auto h = conv_forward(*l1, x, side);
    auto y = conv_forward(*l2, h, side / 2);
    const std::size_t loc = (side / 4) * (side / 4);
    Eigen::MatrixXd f(static_cast<Eigen::Index>(loc), static_cast<Eigen::Index>(l2->out));
    for (std::size_t o = 0; o < l2->out; ++o)
      for (std::size_t k = 0; k < loc; ++k) f(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(o)) = y[o * loc + k];
    return f;
  };
}

Featurizer pixel_featurizer() {
  return [](const Image& img) {
    Eigen::MatrixXd f(img.size(), 1);
    for (Eigen::Index i = 0; i < img.size(); ++i) f(i, 0) = img.data()[i];
    return f;
  };
}

ViewFeatureStats feature_stats(const Eigen::MatrixXd& f) {
  if (f.rows() < 2) throw MetricError("feature_stats: need at least 2 feature vectors");
  ViewFeatureStats s;
  s.mean = f.colwise().mean().transpose();
  const Eigen::MatrixXd centred = f.rowwise() - s.mean.transpose();
  s.cov = centred.transpose() * centred / static_cast<double>(f.rows() - 1);
  return s;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  constexpr double kTol = 1e-10;
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  if ((m - sym).cwiseAbs().maxCoeff() > kTol * std::max(1.0, m.cwiseAbs().maxCoeff()))
    throw MetricError("psd_sqrt: matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  Eigen::VectorXd ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < -kTol * scale)
      throw MetricError("psd_sqrt: eigenvalue " + std::to_string(ev[i]) + " below tolerance");
    ev[i] = std::sqrt(std::max(0.0, ev[i]));
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

double frechet_distance(const ViewFeatureStats& a, const ViewFeatureStats& b) {
  if (a.mean.size() != b.mean.size()) throw MetricError("frechet: feature widths differ");
  const Eigen::MatrixXd ra = psd_sqrt(a.cov);
  const Eigen::MatrixXd inner = ra * b.cov * ra;
  const double tr = (a.cov + b.cov).trace() - 2.0 * psd_sqrt(0.5 * (inner + inner.transpose())).trace();
  return (a.mean - b.mean).squaredNorm() + tr;
}

double fid_lite_images(const std::vector<Image>& a, const std::vector<Image>& b, const Featurizer& f) {
  if (a.size() != b.size() || a.empty()) throw MetricError("fid_lite: need equal, non-empty view lists");
  std::vector<double> terms(a.size());
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < a.size(); ++i) terms[i] = frechet_distance(feature_stats(f(a[i])), feature_stats(f(b[i])));
  double s = 0.0;
  for (double t : terms) s += t;
  return s / static_cast<double>(a.size());
}

double fid_lite(const TriMesh& a, const TriMesh& b, std::size_t views, const Featurizer& f) {
  if (a.empty() || b.empty()) throw MetricError("fid_lite: empty mesh");
  const auto dirs = fid_view_directions(views);
  std::vector<Image> ia, ib;
  for (const auto& d : dirs) {
    ia.push_back(render_shaded(a, d));
    ib.push_back(render_shaded(b, d));
  }
  return fid_lite_images(ia, ib, f);
}

nlohmann::json report_to_json(const MetricReport& r) {
  nlohmann::json j{{"cd", r.cd}, {"emd", r.emd}, {"n", r.n}, {"seed", r.seed}, {"subsample", r.subsample}};
  j["fid_lite"] = r.fid_lite ? nlohmann::json(*r.fid_lite) : nlohmann::json(nullptr);
  return j;
}

namespace {

PointSet subsample(const PointSet& s, std::size_t k, std::uint64_t seed) {
  if (k >= s.size()) return s;
  std::vector<std::size_t> idx(s.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i)
    std::swap(idx[i], idx[static_cast<std::size_t>(rng.integer(static_cast<std::int64_t>(i), static_cast<std::int64_t>(s.size()) - 1))]);
  PointSet out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = s[idx[i]];
  return out;
}

}  // namespace

MetricReport mesh_metrics(const TriMesh& a, const TriMesh& b, const MetricOptions& opt) {
  if (a.empty() || b.empty()) throw MetricError("metrics: empty mesh");
  MetricReport r;
  r.n = opt.points;
  r.seed = opt.seed;
  r.subsample = std::min(opt.emd_subsample, opt.points);
  // Same seed for both sides, so identical inputs give identical samples.
  const auto pa = sample_surface(a, opt.points, opt.seed);
  const auto pb = sample_surface(b, opt.points, opt.seed);
  r.cd = chamfer(pa, pb);
  const std::uint64_t sub_seed = mix_seed(opt.seed, 0x5ab);
  r.emd = emd(subsample(pa, r.subsample, sub_seed), subsample(pb, r.subsample, sub_seed));
  if (opt.with_fid) r.fid_lite = fid_lite(a, b);
  return r;
}

MetricReport sampled_metrics(const ShapeGMM& a, const ShapeGMM& b, const MetricOptions& opt) {
  auto ma = extract_mesh(a, opt.resolution);
  auto mb = extract_mesh(b, opt.resolution);
  if (!ma || !mb) throw MetricError(std::string("metrics: ") + (!ma ? "first" : "second") + " shape has no surface");
  return mesh_metrics(*ma, *mb, opt);
}

}  // namespace partsketch
