#include "partsketch/model.hpp"

namespace partsketch {

DecoderConfig ModelConfig::decoder() const {
  DecoderConfig c;
  c.d = d;
  c.heads = heads;
  c.blocks = blocks;
  c.use_text = use_text;
  c.parallel_cross = parallel_cross;
  return c;
}

IsgConfig ModelConfig::isg() const {
  IsgConfig c;
  c.d = d;
  c.adjacency_width = adjacency_width;
  c.gcn_layers = gcn_layers;
  c.gcn_init_gain = gcn_init_gain;
  c.alpha = alpha;
  c.enabled = use_isg;
  return c;
}

nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"parts", c.parts},
          {"clusters", c.clusters},
          {"d", c.d},
          {"heads", c.heads},
          {"blocks", c.blocks},
          {"parallel_cross", c.parallel_cross},
          {"use_text", c.use_text},
          {"use_isg", c.use_isg},
          {"alpha", c.alpha},
          {"adjacency_width", c.adjacency_width},
          {"gcn_layers", c.gcn_layers},
          {"gcn_init_gain", c.gcn_init_gain},
          {"latent_width", c.latent_width},
          {"sketch_side", c.sketch_side},
          {"text_width", c.text_width},
          {"style", to_string(c.style)},
          {"category", to_string(c.category)},
          {"query_std", c.query_std},
          {"seed", c.seed}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.parts = j.at("parts").get<std::size_t>();
  c.clusters = j.at("clusters").get<std::size_t>();
  c.d = j.at("d").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.blocks = j.at("blocks").get<std::size_t>();
  c.parallel_cross = j.at("parallel_cross").get<bool>();
  c.use_text = j.at("use_text").get<bool>();
  c.use_isg = j.at("use_isg").get<bool>();
  c.alpha = j.at("alpha").get<double>();
  c.adjacency_width = j.at("adjacency_width").get<std::size_t>();
  c.gcn_layers = j.at("gcn_layers").get<std::size_t>();
  c.gcn_init_gain = j.value("gcn_init_gain", 0.25);
  c.latent_width = j.at("latent_width").get<std::size_t>();
  c.sketch_side = j.at("sketch_side").get<std::size_t>();
  c.text_width = j.at("text_width").get<std::size_t>();
  c.style = parse_text_style(j.at("style").get<std::string>());
  c.category = parse_category(j.at("category").get<std::string>());
  c.query_std = j.at("query_std").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

Model make_model(const ModelConfig& cfg) {
  if (cfg.clusters == 0 || cfg.clusters > cfg.parts) throw std::invalid_argument("need 1 <= clusters <= parts");
  Model m;
  m.config = cfg;
  Rng rng(cfg.seed);
  m.queries = m.params.add("queries", normal_tensor(rng, cfg.parts, cfg.d, cfg.query_std));
  m.visual = make_visual_encoder(m.params, "visual", cfg.sketch_side, cfg.d, rng);
  if (cfg.use_text) m.text = make_text_projection(m.params, "text_proj", cfg.text_width, cfg.d, rng);
  const DecoderConfig dc = cfg.decoder();
  for (std::size_t b = 0; b < cfg.blocks; ++b)
    m.blocks.push_back(make_decoder_block(m.params, "block" + std::to_string(b), dc, rng));
  if (cfg.use_isg) m.isg = make_isg(m.params, "isg", cfg.isg(), rng);
  m.head = make_latent_head(m.params, "head", cfg.d, cfg.latent_width, rng);
  m.template_assignment.k = cfg.clusters;
  m.template_assignment.labels.resize(cfg.parts);
  for (std::size_t i = 0; i < cfg.parts; ++i)
    m.template_assignment.labels[i] = static_cast<int>(i * cfg.clusters / cfg.parts);
  return m;
}

ForwardResult forward(Tape& t, const Model& m, const SketchRaster& sketch, const Tensor2& text_tokens,
                      const PartAssignment& assign) {
  const auto& cfg = m.config;
  Embeddings emb;
  emb.visual = encode_sketch(t, m.visual, sketch);
  if (cfg.use_text) {
    if (text_tokens.cols() != cfg.text_width)
      throw DimensionError("text tokens have width " + std::to_string(text_tokens.cols()) + ", model expects " +
                           std::to_string(cfg.text_width));
    emb.text = project_text(t, m.text, text_tokens);
  }
  Var q = decode(t, t.param(m.queries), emb, m.blocks, cfg.decoder());
  ForwardResult r;
  r.isg = isgnet_forward(t, q, assign, m.isg, cfg.isg());
  r.latents = latent_head(t, m.head, r.isg.q_final);
  return r;
}

Tensor2 text_tokens_for(const ModelConfig& cfg, const std::optional<PartDescription>& desc) {
  if (!desc) return empty_text_embedding(cfg.text_width).tokens;
  return synth_text_embedding(*desc, cfg.style, cfg.text_width).tokens;
}

Tensor2 predict_latents(const Model& m, const SketchRaster& sketch, const std::optional<PartDescription>& desc) {
  Tape t(&m.params);
  return forward(t, m, sketch, text_tokens_for(m.config, desc), m.template_assignment).latents.value();
}

ShapeGMM predict_shape(const Model& m, const SketchRaster& sketch, const std::optional<PartDescription>& desc) {
  return LatentCodec(m.config.latent_width).decode(predict_latents(m, sketch, desc));
}

double gmm_param_l1(const ShapeGMM& a, const ShapeGMM& b) {
  if (a.size() != b.size() || a.size() == 0) throw DimensionError("gmm_param_l1: part counts differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& p = a.parts[i];
    const auto& q = b.parts[i];
    s += (p.mu - q.mu).cwiseAbs().sum() + (p.axes - q.axes).cwiseAbs().sum() + (p.scales - q.scales).cwiseAbs().sum() +
         std::abs(p.weight - q.weight);
  }
  return s / (16.0 * static_cast<double>(a.size()));
}

}  // namespace partsketch
