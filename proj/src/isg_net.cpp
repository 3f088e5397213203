#include "partsketch/isg_net.hpp"

#include <cmath>

namespace partsketch {

IsgParams make_isg(ParameterSet& ps, const std::string& name, const IsgConfig& cfg, Rng& rng) {
  if (cfg.alpha < 0.0 || cfg.alpha > 1.0) throw std::invalid_argument("alpha must lie in [0, 1]");
  IsgParams p;
  p.indiv_predictor = make_mlp2(ps, name + ".indiv_pred", cfg.d, cfg.d, cfg.adjacency_width, rng);
  p.part_predictor = make_mlp2(ps, name + ".part_pred", cfg.d, cfg.d, cfg.adjacency_width, rng);
  const double std = cfg.gcn_init_gain / std::sqrt(static_cast<double>(cfg.d));
  for (std::size_t l = 0; l < cfg.gcn_layers; ++l) {
    p.indiv_gcn.weights.push_back(
        ps.add(name + ".indiv_gcn." + std::to_string(l), normal_tensor(rng, cfg.d, cfg.d, std)));
    p.part_gcn.weights.push_back(
        ps.add(name + ".part_gcn." + std::to_string(l), normal_tensor(rng, cfg.d, cfg.d, std)));
  }
  p.fuse_norm = make_layer_norm(ps, name + ".fuse_norm", cfg.d);
  return p;
}

Var predict_adjacency(Tape& t, const Mlp2& predictor, Var x) {
  Var r = apply(t, predictor, x);
  return ad::sigmoid(ad::matmul_nt(r, r));
}

Var gcn_forward(Tape& t, Var x, Var adj, const GcnParams& gcn) {
  if (adj.rows() != x.rows() || adj.cols() != x.rows())
    throw DimensionError("gcn: adjacency " + adj.value().shape_string() + " for " + std::to_string(x.rows()) +
                         " nodes");
  for (ParamId w : gcn.weights) x = ad::relu(ad::matmul(ad::matmul(adj, x), t.param(w)));
  return x;
}

IsgOutput isgnet_forward(Tape& t, Var q_tv, const PartAssignment& assign, const IsgParams& p,
                         const IsgConfig& cfg) {
  IsgOutput out;
  if (!cfg.enabled) {
    out.q_final = q_tv;
    return out;
  }
  if (assign.n() != q_tv.rows())
    throw DimensionError("isgnet: assignment over " + std::to_string(assign.n()) + " nodes for " +
                         std::to_string(q_tv.rows()) + " queries");
  const double alpha = cfg.alpha;

  out.adj_indiv = predict_adjacency(t, p.indiv_predictor, q_tv);
  Var pooled = ad::matmul(t.constant(pooling_matrix(assign)), q_tv);
  out.adj_part = predict_adjacency(t, p.part_predictor, pooled);

  Var fused = q_tv;
  if (alpha != 0.0) {
    Var q_indiv = gcn_forward(t, q_tv, out.adj_indiv, p.indiv_gcn);
    fused = ad::add(alpha == 1.0 ? q_indiv : ad::scale(q_indiv, alpha), fused);
  }
  if (alpha != 1.0) {
    Var q_part = ad::matmul(t.constant(unpooling_matrix(assign)), gcn_forward(t, pooled, out.adj_part, p.part_gcn));
    fused = ad::add(alpha == 0.0 ? q_part : ad::scale(q_part, 1.0 - alpha), fused);
  }
  out.q_final = apply(t, p.fuse_norm, fused);
  return out;
}

}  // namespace partsketch
