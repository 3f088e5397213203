#pragma once

// Procedural shapes, sketches and descriptions, plus the linear latent codec
// that maps a shape's parts to ground-truth latent rows and back.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "partsketch/gmm_shape.hpp"
#include "partsketch/raster.hpp"
#include "partsketch/text_embedding.hpp"

namespace partsketch {

enum class Category { Chair, Airplane, Lamp };
Category parse_category(const std::string& s);
std::string to_string(Category c);

struct SlotGroup {
  std::string name;
  std::size_t first = 0, count = 0;
};

struct ShapeTemplate {
  Category category = Category::Chair;
  std::vector<SlotGroup> groups;  // covers slots 0..15 in order
  double min_scale = 0.02, max_scale = 0.5;

  const SlotGroup& group(const std::string& name) const;
};

ShapeTemplate shape_template(Category c);

struct ShapeSample {
  ShapeGMM shape;
  PartDescription desc;
};

// Deterministic in (template, seed). Latents are filled in by latent_of.
ShapeSample sample_shape(const ShapeTemplate& tpl, std::uint64_t seed);

// Parameter vector of one part: mu(3), rotation vector(3), log(scale / s0)(3), 2w - 1.
inline constexpr std::size_t kThetaWidth = 10;
inline constexpr double kScaleBaseline = 0.2;

class LatentCodec {
 public:
  explicit LatentCodec(std::size_t width = 32, std::uint64_t seed = 0x5eedc0dec);

  std::size_t width() const { return width_; }
  const Eigen::MatrixXd& basis() const { return basis_; }  // width x 10, orthonormal columns

  static Eigen::Matrix<double, kThetaWidth, 1> pack(const GaussianPart& p);
  // Clamps weight to [0,1] and means to the valid box, so any finite theta decodes.
  static GaussianPart unpack(const Eigen::Matrix<double, kThetaWidth, 1>& theta);

  Tensor2 latent_of(const ShapeGMM& shape) const;  // parts x width
  ShapeGMM decode(const Tensor2& z) const;         // latents field set to z

 private:
  std::size_t width_;
  Eigen::MatrixXd basis_;
};

enum class View { Front, Side, ThreeQuarter };
View parse_view(const std::string& s);
std::string to_string(View v);
// Orthonormal camera frame rows: image right, image up, viewing direction.
Mat3 view_frame(View v);

struct RenderOptions {
  std::size_t side = 64;
  double extent = 1.2;   // image covers [-extent, extent]^2
  double jitter = 1.0;   // stroke displacement amplitude in pixels
};

// Silhouette of occupancy >= 0.5 along orthographic rays, reduced to a
// 1-pixel outline, then displaced by a smooth seeded field.
SketchRaster render_silhouette(const ShapeGMM& shape, View view, const RenderOptions& opt = {});
SketchRaster render_sketch(const ShapeGMM& shape, View view, std::uint64_t seed, const RenderOptions& opt = {});

struct DatasetConfig {
  Category category = Category::Chair;
  std::size_t count = 8;
  std::uint64_t seed = 1;
  std::vector<View> views{View::Front, View::Side, View::ThreeQuarter};
  RenderOptions render;
  std::size_t latent_width = 32;
};

struct DatasetEntry {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  View view = View::Front;
};

struct Sample {
  DatasetEntry entry;
  ShapeGMM shape;  // latents hold the ground-truth z
  SketchRaster sketch;
  PartDescription desc;
};

DatasetEntry dataset_entry(const DatasetConfig& cfg, std::size_t index);
Sample make_sample(const DatasetConfig& cfg, std::size_t index);
std::vector<Sample> make_dataset(const DatasetConfig& cfg);

// Writes manifest.json and NNNN.{gmm.json,sketch.png,desc.json,z.bin}.
void write_dataset(const std::string& dir, const DatasetConfig& cfg);

struct Dataset {
  DatasetConfig config;
  std::vector<Sample> samples;
};

// Reads the files back; z comes from NNNN.z.bin (float32).
Dataset read_dataset(const std::string& dir);
DatasetConfig read_manifest(const std::string& dir);

std::string sample_stem(std::size_t index);

}  // namespace partsketch
