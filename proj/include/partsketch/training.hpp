#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "partsketch/model.hpp"

namespace partsketch {

struct LossWeights {
  double align = 1.0, indiv = 0.1, part = 0.1;
};

struct OneCycle {
  double warmup_frac = 0.3;
  double div_factor = 25.0;
  double final_div = 1e4;
};

// Cosine warmup from peak/div_factor to peak at step floor(warmup_frac *
// (total - 1)), then cosine decay to peak/final_div at the last step.
double onecycle_lr(std::size_t step, std::size_t total_steps, double peak, const OneCycle& cfg = {});

enum class AssignmentSource { PerShape, Template };

struct TrainConfig {
  std::size_t batch = 16;
  double peak_lr = 1e-4;
  std::size_t epochs = 100;
  std::size_t max_steps = 0;  // nonzero overrides epochs
  OneCycle schedule;
  LossWeights weights;
  std::uint64_t seed = 1;
  AssignmentSource assignment = AssignmentSource::PerShape;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One training example with its supervision precomputed.
struct Example {
  SketchRaster sketch;
  Tensor2 text;
  Tensor2 z;
  PartAssignment assign;
  Tensor2 adj_indiv;  // pseudo ground truth, parts x parts
  Tensor2 adj_part;   // clusters x clusters
};

Example make_example(const ModelConfig& cfg, const Sample& s, const PartAssignment* fixed_assign = nullptr);

struct LossTerms {
  Var align, indiv, part, total;
};

LossTerms example_losses(Tape& t, const ForwardResult& fr, const Example& ex, const LossWeights& w);

struct LossValues {
  double align = 0, indiv = 0, part = 0, total = 0;
};

struct BatchResult {
  LossValues loss;  // batch means
  Gradients grads;  // gradient of the batch-mean total
};

// Per-example tapes (OpenMP across examples), summed in index order.
BatchResult batch_gradients(const Model& m, const std::vector<const Example*>& batch, const LossWeights& w);
LossValues evaluate_losses(const Model& m, const std::vector<Example>& examples, const LossWeights& w);

class Adam {
 public:
  Adam(const ParameterSet& ps, double beta1, double beta2, double eps);
  void step(ParameterSet& ps, const Gradients& g, double lr);
  std::size_t steps() const { return t_; }

 private:
  double b1_, b2_, eps_;
  std::size_t t_ = 0;
  std::vector<Tensor2> m_, v_;
};

struct StepLog {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double lr = 0.0;
  LossValues loss;
};

using StepCallback = std::function<void(const StepLog&)>;

struct TrainResult {
  Model model;
  std::vector<StepLog> history;
};

// Category template assignment is computed from the training shapes and stored in the model.
TrainResult train(const std::vector<Sample>& data, const ModelConfig& mcfg, const TrainConfig& tcfg,
                  const StepCallback& on_step = {});

std::size_t total_steps(std::size_t examples, const TrainConfig& cfg);

// Single-file checkpoint: "PSCK", u32 version, u32 header length, JSON
// header (config, parameter names and shapes, template assignment, extra
// metadata), then one float64 flat-binary blob per parameter.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const Model& m, const nlohmann::json& extra = nlohmann::json::object());
Model deserialize_checkpoint(std::string_view bytes, nlohmann::json* extra = nullptr);
void save_checkpoint(const std::string& path, const Model& m, const nlohmann::json& extra = nlohmann::json::object());
Model load_checkpoint(const std::string& path, nlohmann::json* extra = nullptr);
std::string checkpoint_hash(const Model& m);

}  // namespace partsketch
