#pragma once

// Small parameterised building blocks registered in a ParameterSet.

#include <string>

#include "partsketch/autodiff.hpp"
#include "partsketch/random.hpp"

namespace partsketch {

// y = x W + b, W: in x out.
struct Linear {
  ParamId w, b;
  bool has_bias = true;
};

// Weights ~ N(0, 1/in); zero bias.
Linear make_linear(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
                   bool bias = true);
Var apply(Tape& t, const Linear& l, Var x);

struct LayerNormParams {
  ParamId gain, bias;
};

LayerNormParams make_layer_norm(ParameterSet& ps, const std::string& name, std::size_t width);
Var apply(Tape& t, const LayerNormParams& ln, Var x);

// Linear -> activation -> Linear.
struct Mlp2 {
  Linear first, second;
  Activation act = Activation::Relu;
};

Mlp2 make_mlp2(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
               Rng& rng, Activation act = Activation::Relu);
Var apply(Tape& t, const Mlp2& m, Var x);

Tensor2 normal_tensor(Rng& rng, std::size_t rows, std::size_t cols, double stddev);

}  // namespace partsketch
