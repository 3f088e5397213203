#pragma once

// Visual tokens from a sketch raster: 8x8 patches through a shared linear
// map, a learned per-position offset, then a token-wise residual MLP.

#include <string>

#include "partsketch/layers.hpp"
#include "partsketch/raster.hpp"

namespace partsketch {

inline constexpr std::size_t kPatch = 8;

struct VisualEncoder {
  Linear patch;      // 64 -> d
  ParamId position;  // tokens x d
  Mlp2 mix;          // d -> d -> d
  std::size_t side = 64;
};

VisualEncoder make_visual_encoder(ParameterSet& ps, const std::string& name, std::size_t side, std::size_t d,
                                  Rng& rng);

// tokens x 64 matrix of pixel patches, tokens in row-major patch order.
Tensor2 patch_matrix(const SketchRaster& img);

// Pre-mixing tokens: patches * W + b.
Var patch_tokens(Tape& t, const VisualEncoder& enc, const SketchRaster& img);
Var encode_sketch(Tape& t, const VisualEncoder& enc, const SketchRaster& img);

// Learned width adapter for a text provider.
struct TextProjection {
  Linear proj;
};

TextProjection make_text_projection(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t d,
                                    Rng& rng);
Var project_text(Tape& t, const TextProjection& p, const Tensor2& tokens);

}  // namespace partsketch
