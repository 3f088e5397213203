#include "partsketch/layers.hpp"

#include <cmath>

namespace partsketch {

Tensor2 normal_tensor(Rng& rng, std::size_t rows, std::size_t cols, double stddev) {
  Tensor2 t(rows, cols);
  for (double& v : t.values()) v = stddev * rng.normal();
  return t;
}

Linear make_linear(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
                   bool bias) {
  Linear l;
  l.w = ps.add(name + ".w", normal_tensor(rng, in, out, 1.0 / std::sqrt(static_cast<double>(in))));
  l.has_bias = bias;
  if (bias) l.b = ps.add(name + ".b", Tensor2(1, out));
  return l;
}

Var apply(Tape& t, const Linear& l, Var x) {
  Var y = ad::matmul(x, t.param(l.w));
  return l.has_bias ? ad::add_row(y, t.param(l.b)) : y;
}

LayerNormParams make_layer_norm(ParameterSet& ps, const std::string& name, std::size_t width) {
  return {ps.add(name + ".gain", Tensor2(1, width, 1.0)), ps.add(name + ".bias", Tensor2(1, width))};
}

Var apply(Tape& t, const LayerNormParams& ln, Var x) {
  return ad::layer_norm(x, t.param(ln.gain), t.param(ln.bias));
}

Mlp2 make_mlp2(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
               Rng& rng, Activation act) {
  return {make_linear(ps, name + ".0", in, hidden, rng), make_linear(ps, name + ".1", hidden, out, rng), act};
}

Var apply(Tape& t, const Mlp2& m, Var x) {
  return apply(t, m.second, ad::activate(apply(t, m.first, x), m.act));
}

}  // namespace partsketch
