#pragma once

// Learnable-query decoder: queries attend to themselves, then to visual
// tokens, then to text tokens, one post-norm residual per sub-layer.

#include <string>
#include <vector>

#include "partsketch/layers.hpp"

namespace partsketch {

struct AttentionParams {
  Linear wq, wk, wv, wo;  // no biases
  std::size_t heads = 1;
};

AttentionParams make_attention(ParameterSet& ps, const std::string& name, std::size_t d, std::size_t heads,
                               Rng& rng);

// softmax(Q K^T / sqrt(d_head)) V per head, heads concatenated, then W_O.
Var attention(Tape& t, const AttentionParams& p, Var q_in, Var kv_in);
// Attention weights for one head, plain values; rows sum to 1.
Tensor2 attention_weights(const ParameterSet& ps, const AttentionParams& p, const Tensor2& q_in,
                          const Tensor2& kv_in, std::size_t head = 0);

struct DecoderConfig {
  std::size_t d = 64;
  std::size_t heads = 1;
  std::size_t ff_mult = 4;
  std::size_t blocks = 2;
  bool use_text = true;
  // Visual and text cross-attention read the same input and share one residual.
  bool parallel_cross = false;
};

struct DecoderBlock {
  AttentionParams self1, visual, self2, text;
  Mlp2 ff1, ff2;
  LayerNormParams n_self1, n_visual, n_self2, n_ff1, n_text, n_ff2;
};

DecoderBlock make_decoder_block(ParameterSet& ps, const std::string& name, const DecoderConfig& cfg, Rng& rng);

struct Embeddings {
  Var visual;
  Var text;  // ignored when the config disables text
};

Var decoder_block(Tape& t, Var q, const Embeddings& emb, const DecoderBlock& block, const DecoderConfig& cfg);
Var decode(Tape& t, Var queries, const Embeddings& emb, const std::vector<DecoderBlock>& blocks,
           const DecoderConfig& cfg);

}  // namespace partsketch
