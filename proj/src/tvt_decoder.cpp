#include "partsketch/tvt_decoder.hpp"

#include <cmath>

namespace partsketch {

AttentionParams make_attention(ParameterSet& ps, const std::string& name, std::size_t d, std::size_t heads,
                               Rng& rng) {
  if (heads == 0 || d % heads != 0)
    throw DimensionError("attention: width " + std::to_string(d) + " not divisible by " + std::to_string(heads) +
                         " heads");
  AttentionParams p;
  p.wq = make_linear(ps, name + ".wq", d, d, rng, false);
  p.wk = make_linear(ps, name + ".wk", d, d, rng, false);
  p.wv = make_linear(ps, name + ".wv", d, d, rng, false);
  p.wo = make_linear(ps, name + ".wo", d, d, rng, false);
  p.heads = heads;
  return p;
}

Var attention(Tape& t, const AttentionParams& p, Var q_in, Var kv_in) {
  if (q_in.cols() != kv_in.cols())
    throw DimensionError("attention: query width " + std::to_string(q_in.cols()) + " vs key/value width " +
                         std::to_string(kv_in.cols()));
  Var q = apply(t, p.wq, q_in);
  Var k = apply(t, p.wk, kv_in);
  Var v = apply(t, p.wv, kv_in);
  const std::size_t dh = q.cols() / p.heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  Var out;
  if (p.heads == 1) {
    out = ad::matmul(ad::softmax_rows(ad::scale(ad::matmul_nt(q, k), inv)), v);
  } else {
    std::vector<Var> heads;
    for (std::size_t h = 0; h < p.heads; ++h) {
      Var qh = ad::slice_cols(q, h * dh, dh);
      Var kh = ad::slice_cols(k, h * dh, dh);
      Var vh = ad::slice_cols(v, h * dh, dh);
      heads.push_back(ad::matmul(ad::softmax_rows(ad::scale(ad::matmul_nt(qh, kh), inv)), vh));
    }
    out = ad::concat_cols(heads);
  }
  return apply(t, p.wo, out);
}

Tensor2 attention_weights(const ParameterSet& ps, const AttentionParams& p, const Tensor2& q_in,
                          const Tensor2& kv_in, std::size_t head) {
  Tape t(&ps);
  Var q = apply(t, p.wq, t.constant(q_in));
  Var k = apply(t, p.wk, t.constant(kv_in));
  const std::size_t dh = q.cols() / p.heads;
  Var qh = ad::slice_cols(q, head * dh, dh);
  Var kh = ad::slice_cols(k, head * dh, dh);
  return ad::softmax_rows(ad::scale(ad::matmul_nt(qh, kh), 1.0 / std::sqrt(static_cast<double>(dh)))).value();
}

DecoderBlock make_decoder_block(ParameterSet& ps, const std::string& name, const DecoderConfig& cfg, Rng& rng) {
  const std::size_t d = cfg.d;
  DecoderBlock b;
  b.self1 = make_attention(ps, name + ".self1", d, cfg.heads, rng);
  b.n_self1 = make_layer_norm(ps, name + ".n_self1", d);
  b.visual = make_attention(ps, name + ".visual", d, cfg.heads, rng);
  b.n_visual = make_layer_norm(ps, name + ".n_visual", d);
  b.self2 = make_attention(ps, name + ".self2", d, cfg.heads, rng);
  b.n_self2 = make_layer_norm(ps, name + ".n_self2", d);
  b.ff1 = make_mlp2(ps, name + ".ff1", d, cfg.ff_mult * d, d, rng);
  b.n_ff1 = make_layer_norm(ps, name + ".n_ff1", d);
  if (cfg.use_text) {
    b.text = make_attention(ps, name + ".text", d, cfg.heads, rng);
    if (!cfg.parallel_cross) b.n_text = make_layer_norm(ps, name + ".n_text", d);
  }
  b.ff2 = make_mlp2(ps, name + ".ff2", d, cfg.ff_mult * d, d, rng);
  b.n_ff2 = make_layer_norm(ps, name + ".n_ff2", d);
  return b;
}

Var decoder_block(Tape& t, Var x, const Embeddings& emb, const DecoderBlock& b, const DecoderConfig& cfg) {
  auto residual = [&](Var in, Var f, const LayerNormParams& n) { return apply(t, n, ad::add(in, f)); };

  x = residual(x, attention(t, b.self1, x, x), b.n_self1);
  if (cfg.parallel_cross && cfg.use_text) {
    Var both = ad::add(attention(t, b.visual, x, emb.visual), attention(t, b.text, x, emb.text));
    x = residual(x, both, b.n_visual);
    x = residual(x, attention(t, b.self2, x, x), b.n_self2);
    x = residual(x, apply(t, b.ff1, x), b.n_ff1);
  } else {
    x = residual(x, attention(t, b.visual, x, emb.visual), b.n_visual);
    x = residual(x, attention(t, b.self2, x, x), b.n_self2);
    x = residual(x, apply(t, b.ff1, x), b.n_ff1);
    if (cfg.use_text) x = residual(x, attention(t, b.text, x, emb.text), b.n_text);
  }
  return residual(x, apply(t, b.ff2, x), b.n_ff2);
}

Var decode(Tape& t, Var queries, const Embeddings& emb, const std::vector<DecoderBlock>& blocks,
           const DecoderConfig& cfg) {
  if (blocks.empty()) throw DimensionError("decode: at least one block required");
  Var x = queries;
  for (const auto& b : blocks) x = decoder_block(t, x, emb, b, cfg);
  return x;
}

}  // namespace partsketch
