#pragma once

#include "partsketch/layers.hpp"

namespace partsketch {

inline constexpr std::size_t kDefaultLatentWidth = 32;

// Row-wise d -> d -> d_z MLP with ReLU.
struct LatentHead {
  Mlp2 mlp;
};

inline LatentHead make_latent_head(ParameterSet& ps, const std::string& name, std::size_t d, std::size_t dz,
                                   Rng& rng) {
  return {make_mlp2(ps, name, d, d, dz, rng)};
}

inline Var latent_head(Tape& t, const LatentHead& h, Var q) { return apply(t, h.mlp, q); }

}  // namespace partsketch
