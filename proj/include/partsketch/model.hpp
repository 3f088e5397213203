#pragma once

// Full sketch(+text) -> per-part latent network and its configuration.

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "partsketch/adjacency.hpp"
#include "partsketch/datagen.hpp"
#include "partsketch/encoders.hpp"
#include "partsketch/isg_net.hpp"
#include "partsketch/latent_head.hpp"
#include "partsketch/text_embedding.hpp"
#include "partsketch/tvt_decoder.hpp"

namespace partsketch {

struct ModelConfig {
  std::size_t parts = kDefaultPartCount;
  std::size_t clusters = 4;
  std::size_t d = 64;
  std::size_t heads = 1;
  std::size_t blocks = 2;
  bool parallel_cross = false;
  bool use_text = true;
  bool use_isg = true;
  double alpha = 0.8;
  std::size_t adjacency_width = 32;
  std::size_t gcn_layers = 2;
  double gcn_init_gain = 0.25;
  std::size_t latent_width = kDefaultLatentWidth;
  std::size_t sketch_side = 64;
  std::size_t text_width = 64;
  TextStyle style = TextStyle::SingleSentence;
  Category category = Category::Chair;
  double query_std = 0.02;
  std::uint64_t seed = 1;

  DecoderConfig decoder() const;
  IsgConfig isg() const;
};

nlohmann::json config_to_json(const ModelConfig& c);
ModelConfig config_from_json(const nlohmann::json& j);

struct Model {
  ModelConfig config;
  ParameterSet params;
  ParamId queries;
  VisualEncoder visual;
  TextProjection text;
  std::vector<DecoderBlock> blocks;
  IsgParams isg;
  LatentHead head;
  // Category-level grouping used when ground-truth means are unavailable.
  PartAssignment template_assignment;
};

// Parameters are created in a fixed order from config.seed.
Model make_model(const ModelConfig& cfg);

struct ForwardResult {
  Var latents;  // parts x latent_width
  IsgOutput isg;
};

ForwardResult forward(Tape& t, const Model& m, const SketchRaster& sketch, const Tensor2& text_tokens,
                      const PartAssignment& assign);

// Text tokens the model expects for a description (zero token when absent).
Tensor2 text_tokens_for(const ModelConfig& cfg, const std::optional<PartDescription>& desc);

// Inference with the template assignment; returns decoded latents.
Tensor2 predict_latents(const Model& m, const SketchRaster& sketch, const std::optional<PartDescription>& desc);
ShapeGMM predict_shape(const Model& m, const SketchRaster& sketch, const std::optional<PartDescription>& desc);

// Mean absolute difference over mu, axes, scales and weight of paired parts.
double gmm_param_l1(const ShapeGMM& a, const ShapeGMM& b);

}  // namespace partsketch
