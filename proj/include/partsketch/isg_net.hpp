#pragma once

// Dual graph refinement of decoded queries: a per-Gaussian graph and a
// per-part graph over pooled queries, fused with weight alpha.

#include <string>
#include <vector>

#include "partsketch/adjacency.hpp"
#include "partsketch/layers.hpp"

namespace partsketch {

struct IsgConfig {
  std::size_t d = 64;
  std::size_t adjacency_width = 32;
  std::size_t gcn_layers = 2;
  double alpha = 0.8;
  // Scales the N(0, 1/d) init of graph-conv weights. The raw adjacency sums
  // over all nodes, so unit gain starts the conv output several times larger
  // than its input and the fused queries collapse toward their mean.
  double gcn_init_gain = 0.25;
  // Off: the refined queries are the decoder output unchanged and no
  // adjacency is predicted.
  bool enabled = true;
};

struct GcnParams {
  std::vector<ParamId> weights;  // d x d each
};

struct IsgParams {
  Mlp2 indiv_predictor, part_predictor;
  GcnParams indiv_gcn, part_gcn;
  LayerNormParams fuse_norm;
};

IsgParams make_isg(ParameterSet& ps, const std::string& name, const IsgConfig& cfg, Rng& rng);

// sigmoid(R R^T) with R = predictor(x).
Var predict_adjacency(Tape& t, const Mlp2& predictor, Var x);
// x <- relu(adj x W) per layer.
Var gcn_forward(Tape& t, Var x, Var adj, const GcnParams& gcn);

struct IsgOutput {
  Var q_final;
  Var adj_indiv;  // invalid when disabled
  Var adj_part;
};

IsgOutput isgnet_forward(Tape& t, Var q_tv, const PartAssignment& assign, const IsgParams& p,
                         const IsgConfig& cfg);

}  // namespace partsketch
