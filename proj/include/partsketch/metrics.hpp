#pragma once

// Point-set and rendered-view metrics between shapes.

#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "partsketch/gmm_shape.hpp"
#include "partsketch/mesh.hpp"

namespace partsketch {

class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using PointSet = std::vector<Vec3>;

// Mean squared nearest-neighbour distance, summed over both directions.
double chamfer(const PointSet& p, const PointSet& g);

// Optimal one-to-one assignment; returns perm with p[i] matched to
// g[perm[i]]. Cost is Euclidean distance.
std::vector<std::size_t> optimal_assignment(const PointSet& p, const PointSet& g);
// Mean transport cost of the optimal assignment. Sizes must match.
double emd(const PointSet& p, const PointSet& g);

// ---- FID-lite ----

inline constexpr std::size_t kFidViews = 20;
inline constexpr std::size_t kFidSide = 64;
inline constexpr std::size_t kFidFeatures = 64;

using Image = Eigen::MatrixXd;  // row = image y (top first), col = x

// View directions on a Fibonacci sphere; the i-th view looks along -dirs[i].
std::vector<Vec3> fid_view_directions(std::size_t views = kFidViews);
// Orthographic z-buffered Lambert shading over [-1.2, 1.2]^2; light fixed in the camera frame.
Image render_shaded(const TriMesh& mesh, const Vec3& view_dir, std::size_t side = kFidSide);

// Maps an image to a (locations x channels) feature matrix.
using Featurizer = std::function<Eigen::MatrixXd(const Image&)>;

// Two stride-2 3x3 convolutions with fixed seeded weights: 64x64 -> 16x16 locations of 64 channels.
Featurizer conv_featurizer(std::uint64_t seed = 0xf1d11e);
// One location per pixel with one channel holding its value.
Featurizer pixel_featurizer();

struct ViewFeatureStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // sample covariance over locations
};

ViewFeatureStats feature_stats(const Eigen::MatrixXd& features);
// ||mu - mu'||^2 + Tr(S + S' - 2 sqrt(sqrt(S) S' sqrt(S))).
double frechet_distance(const ViewFeatureStats& a, const ViewFeatureStats& b);
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m);

// Mean per-view Frechet distance between paired image lists.
double fid_lite_images(const std::vector<Image>& a, const std::vector<Image>& b, const Featurizer& f);
double fid_lite(const TriMesh& a, const TriMesh& b, std::size_t views = kFidViews,
                const Featurizer& f = conv_featurizer());

// ---- shape-level report ----

struct MetricOptions {
  std::size_t points = 2048;
  std::size_t emd_subsample = 256;  // exact assignment on this many points
  std::uint64_t seed = 0;
  std::size_t resolution = 48;
  bool with_fid = true;
};

struct MetricReport {
  double cd = 0.0;
  double emd = 0.0;
  std::optional<double> fid_lite;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::size_t subsample = 0;
};

nlohmann::json report_to_json(const MetricReport& r);

MetricReport mesh_metrics(const TriMesh& a, const TriMesh& b, const MetricOptions& opt = {});
// Throws MetricError when either shape has no surface.
MetricReport sampled_metrics(const ShapeGMM& a, const ShapeGMM& b, const MetricOptions& opt = {});

}  // namespace partsketch
