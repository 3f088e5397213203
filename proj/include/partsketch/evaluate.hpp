#pragma once

#include <vector>

#include "json.hpp"
#include "partsketch/metrics.hpp"
#include "partsketch/model.hpp"

namespace partsketch {

struct SampleScore {
  std::size_t index = 0;
  bool ok = false;  // false when the predicted shape has no surface
  MetricReport metrics;
  double param_l1 = 0.0;
};

struct EvalReport {
  std::vector<SampleScore> samples;
  std::size_t failures = 0;
  double median_cd = 0.0, median_emd = 0.0, mean_cd = 0.0, mean_emd = 0.0;
  std::optional<double> mean_fid_lite;
  double mean_param_l1 = 0.0;
  MetricOptions options;
};

// Predicts each sample with the template assignment and scores it against
// its ground-truth shape. Failed samples are excluded from the aggregates.
EvalReport evaluate(const Model& m, const std::vector<Sample>& data, const MetricOptions& opt = {});
nlohmann::json eval_to_json(const EvalReport& r);

}  // namespace partsketch
