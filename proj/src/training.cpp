#include "partsketch/training.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "partsketch/flat_binary.hpp"
#include "partsketch/gmm_json.hpp"

namespace partsketch {

double onecycle_lr(std::size_t step, std::size_t total, double peak, const OneCycle& cfg) {
  if (total == 0 || step >= total)
    throw std::out_of_range("onecycle_lr: step " + std::to_string(step) + " outside [0, " + std::to_string(total) + ")");
  if (total == 1) return peak;
  const double initial = peak / cfg.div_factor;
  const double final_lr = peak / cfg.final_div;
  const auto boundary = static_cast<std::size_t>(std::floor(cfg.warmup_frac * static_cast<double>(total - 1)));
  if (step == boundary) return peak;
  if (step < boundary) {
    const double t = static_cast<double>(step) / static_cast<double>(boundary);
    return peak - (peak - initial) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
  }
  const double t = static_cast<double>(step - boundary) / static_cast<double>(total - 1 - boundary);
  if (step == total - 1) return final_lr;
  return final_lr + (peak - final_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

Example make_example(const ModelConfig& cfg, const Sample& s, const PartAssignment* fixed) {
  Example ex;
  ex.sketch = s.sketch;
  ex.text = text_tokens_for(cfg, s.desc);
  ex.z = s.shape.latents;
  if (ex.z.rows() != cfg.parts || ex.z.cols() != cfg.latent_width)
    throw DimensionError("example latents " + ex.z.shape_string() + " do not match the model");
  const auto means = all_means(s.shape);
  ex.adj_indiv = pseudo_adjacency(means);
  ex.assign = fixed ? *fixed : hierarchical_cluster(ex.adj_indiv, cfg.clusters);
  ex.adj_part = part_pseudo_adjacency(means, ex.assign);
  return ex;
}

LossTerms example_losses(Tape& t, const ForwardResult& fr, const Example& ex, const LossWeights& w) {
  LossTerms l;
  l.align = ad::l1(fr.latents, t.constant(ex.z));
  Var total = w.align == 1.0 ? l.align : ad::scale(l.align, w.align);
  if (fr.isg.adj_indiv.valid()) {
    l.indiv = ad::mse(fr.isg.adj_indiv, t.constant(ex.adj_indiv));
    l.part = ad::mse(fr.isg.adj_part, t.constant(ex.adj_part));
    total = ad::add(total, ad::add(ad::scale(l.indiv, w.indiv), ad::scale(l.part, w.part)));
  }
  l.total = total;
  return l;
}

namespace {

double value_of(Var v) { return v.valid() ? v.value()[0] : 0.0; }

}  // namespace

BatchResult batch_gradients(const Model& m, const std::vector<const Example*>& batch, const LossWeights& w) {
  const std::size_t n = batch.size();
  std::vector<Gradients> per(n);
  std::vector<LossValues> losses(n);
#pragma omp parallel for schedule(static) if (n > 1)
  for (std::size_t i = 0; i < n; ++i) {
    Tape t(&m.params);
    const Example& ex = *batch[i];
    auto fr = forward(t, m, ex.sketch, ex.text, ex.assign);
    auto l = example_losses(t, fr, ex, w);
    losses[i] = {value_of(l.align), value_of(l.indiv), value_of(l.part), value_of(l.total)};
    per[i] = t.backward(l.total);
  }
  BatchResult r;
  r.grads = m.params.zero_gradients();
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < r.grads.size(); ++p) r.grads[p].axpy(inv, per[i][p]);
    r.loss.align += inv * losses[i].align;
    r.loss.indiv += inv * losses[i].indiv;
    r.loss.part += inv * losses[i].part;
    r.loss.total += inv * losses[i].total;
  }
  return r;
}

LossValues evaluate_losses(const Model& m, const std::vector<Example>& examples, const LossWeights& w) {
  std::vector<LossValues> losses(examples.size());
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < examples.size(); ++i) {
    Tape t(&m.params);
    auto fr = forward(t, m, examples[i].sketch, examples[i].text, examples[i].assign);
    auto l = example_losses(t, fr, examples[i], w);
    losses[i] = {value_of(l.align), value_of(l.indiv), value_of(l.part), value_of(l.total)};
  }
  LossValues out;
  const double inv = 1.0 / static_cast<double>(examples.size());
  for (const auto& l : losses) {
    out.align += inv * l.align;
    out.indiv += inv * l.indiv;
    out.part += inv * l.part;
    out.total += inv * l.total;
  }
  return out;
}

Adam::Adam(const ParameterSet& ps, double beta1, double beta2, double eps)
    : b1_(beta1), b2_(beta2), eps_(eps), m_(ps.zero_gradients()), v_(ps.zero_gradients()) {}

void Adam::step(ParameterSet& ps, const Gradients& g, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t p = 0; p < ps.size(); ++p) {
    auto& x = ps.values()[p];
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double gi = g[p][i];
      m_[p][i] = b1_ * m_[p][i] + (1.0 - b1_) * gi;
      v_[p][i] = b2_ * v_[p][i] + (1.0 - b2_) * gi * gi;
      x[i] -= lr * (m_[p][i] / c1) / (std::sqrt(v_[p][i] / c2) + eps_);
    }
  }
}

std::size_t total_steps(std::size_t examples, const TrainConfig& cfg) {
  if (cfg.max_steps) return cfg.max_steps;
  const std::size_t per_epoch = (examples + cfg.batch - 1) / cfg.batch;
  return per_epoch * cfg.epochs;
}

TrainResult train(const std::vector<Sample>& data, const ModelConfig& mcfg, const TrainConfig& tcfg,
                  const StepCallback& on_step) {
  if (data.empty()) throw TrainingError("train: empty dataset");
  if (tcfg.batch == 0) throw TrainingError("train: batch must be positive");
  TrainResult r{make_model(mcfg), {}};
  Model& m = r.model;

  std::vector<std::vector<Vec3>> means;
  for (const auto& s : data) means.push_back(all_means(s.shape));
  m.template_assignment = template_assignment(means, mcfg.clusters);

  std::vector<Example> examples(data.size());
  const PartAssignment* fixed = tcfg.assignment == AssignmentSource::Template ? &m.template_assignment : nullptr;
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < data.size(); ++i) examples[i] = make_example(mcfg, data[i], fixed);

  Adam adam(m.params, tcfg.beta1, tcfg.beta2, tcfg.adam_eps);
  const std::size_t steps = total_steps(data.size(), tcfg);
  std::vector<std::size_t> order;
  std::size_t cursor = 0, epoch = 0;
  auto reshuffle = [&] {
    order.resize(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(mix_seed(tcfg.seed, epoch));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(i) - 1))]);
    cursor = 0;
  };
  reshuffle();

  for (std::size_t step = 0; step < steps; ++step) {
    if (cursor >= order.size()) {
      ++epoch;
      reshuffle();
    }
    std::vector<const Example*> batch;
    while (batch.size() < tcfg.batch && cursor < order.size()) batch.push_back(&examples[order[cursor++]]);
    auto br = batch_gradients(m, batch, tcfg.weights);
    if (!std::isfinite(br.loss.total)) {
      std::ostringstream msg;
      msg << "non-finite loss at step " << step << " (epoch " << epoch << ", batch of " << batch.size() << ")";
      throw TrainingError(msg.str());
    }
    const double lr = onecycle_lr(step, steps, tcfg.peak_lr, tcfg.schedule);
    adam.step(m.params, br.grads, lr);
    StepLog log{step, epoch, lr, br.loss};
    r.history.push_back(log);
    if (on_step) on_step(log);
  }
  return r;
}

namespace {

template <class U>
void put_u32(std::string& out, U v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((static_cast<std::uint32_t>(v) >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

}  // namespace

std::string serialize_checkpoint(const Model& m, const nlohmann::json& extra) {
  nlohmann::json names = nlohmann::json::array();
  for (std::size_t i = 0; i < m.params.size(); ++i)
    names.push_back({{"name", m.params.name(i)}, {"rows", m.params.values()[i].rows()}, {"cols", m.params.values()[i].cols()}});
  nlohmann::json header{{"config", config_to_json(m.config)},
                        {"parameters", names},
                        {"template_assignment", assignment_to_json(m.template_assignment)},
                        {"extra", extra}};
  const std::string hj = header.dump();
  std::string out = "PSCK";
  put_u32(out, kCheckpointVersion);
  put_u32(out, hj.size());
  out += hj;
  for (const auto& v : m.params.values()) out += write_flat(v, kFlatFloat64);
  return out;
}

Model deserialize_checkpoint(std::string_view bytes, nlohmann::json* extra) {
  if (bytes.size() < 12 || bytes.substr(0, 4) != "PSCK") throw FormatError("checkpoint: bad magic");
  if (get_u32(bytes, 4) != kCheckpointVersion) throw FormatError("checkpoint: unsupported version");
  const std::size_t hlen = get_u32(bytes, 8);
  if (bytes.size() < 12 + hlen) throw FormatError("checkpoint: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(12, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: header: ") + e.what());
  }
  Model m = make_model(config_from_json(header.at("config")));
  const auto& names = header.at("parameters");
  if (names.size() != m.params.size()) throw FormatError("checkpoint: parameter count mismatch");
  std::size_t at = 12 + hlen;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i].at("name").get<std::string>() != m.params.name(i))
      throw FormatError("checkpoint: parameter " + std::to_string(i) + " is '" + names[i].at("name").get<std::string>() +
                        "', expected '" + m.params.name(i) + "'");
    std::size_t used = 0;
    Tensor2 v = read_flat(bytes.substr(at), &used);
    if (!v.same_shape(m.params.values()[i])) throw FormatError("checkpoint: shape mismatch for " + m.params.name(i));
    m.params.values()[i] = std::move(v);
    at += used;
  }
  if (at != bytes.size()) throw FormatError("checkpoint: trailing bytes");
  m.template_assignment = assignment_from_json(header.at("template_assignment"));
  if (extra) *extra = header.value("extra", nlohmann::json::object());
  return m;
}

void save_checkpoint(const std::string& path, const Model& m, const nlohmann::json& extra) {
  write_text_file(path, serialize_checkpoint(m, extra));
}

Model load_checkpoint(const std::string& path, nlohmann::json* extra) {
  return deserialize_checkpoint(read_text_file(path), extra);
}

std::string checkpoint_hash(const Model& m) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(serialize_checkpoint(m))));
  return buf;
}

}  // namespace partsketch
