#include "partsketch/encoders.hpp"

namespace partsketch {

VisualEncoder make_visual_encoder(ParameterSet& ps, const std::string& name, std::size_t side, std::size_t d,
                                  Rng& rng) {
  if (side == 0 || side % kPatch != 0)
    throw DimensionError("sketch side " + std::to_string(side) + " is not a multiple of 8");
  VisualEncoder e;
  e.side = side;
  e.patch = make_linear(ps, name + ".patch", kPatch * kPatch, d, rng);
  const std::size_t tokens = (side / kPatch) * (side / kPatch);
  e.position = ps.add(name + ".position", normal_tensor(rng, tokens, d, 0.5));
  e.mix = make_mlp2(ps, name + ".mix", d, d, d, rng);
  return e;
}

Tensor2 patch_matrix(const SketchRaster& img) {
  if (img.side == 0 || img.side % kPatch != 0)
    throw DimensionError("sketch side " + std::to_string(img.side) + " is not a multiple of 8");
  const std::size_t per_row = img.side / kPatch;
  Tensor2 m(per_row * per_row, kPatch * kPatch);
  for (std::size_t pr = 0; pr < per_row; ++pr)
    for (std::size_t pc = 0; pc < per_row; ++pc)
      for (std::size_t y = 0; y < kPatch; ++y)
        for (std::size_t x = 0; x < kPatch; ++x)
          m(pr * per_row + pc, y * kPatch + x) = img.at(pr * kPatch + y, pc * kPatch + x);
  return m;
}

Var patch_tokens(Tape& t, const VisualEncoder& enc, const SketchRaster& img) {
  if (img.side != enc.side)
    throw DimensionError("sketch side " + std::to_string(img.side) + " but encoder expects " +
                         std::to_string(enc.side));
  return apply(t, enc.patch, t.constant(patch_matrix(img)));
}

Var encode_sketch(Tape& t, const VisualEncoder& enc, const SketchRaster& img) {
  Var x = ad::add(patch_tokens(t, enc, img), t.param(enc.position));
  return ad::add(x, apply(t, enc.mix, x));
}

TextProjection make_text_projection(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t d,
                                    Rng& rng) {
  return {make_linear(ps, name, in, d, rng)};
}

Var project_text(Tape& t, const TextProjection& p, const Tensor2& tokens) {
  return apply(t, p.proj, t.constant(tokens));
}

}  // namespace partsketch
