#include "partsketch/evaluate.hpp"

#include <algorithm>

namespace partsketch {

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

}  // namespace

EvalReport evaluate(const Model& m, const std::vector<Sample>& data, const MetricOptions& opt) {
  EvalReport r;
  r.options = opt;
  r.samples.resize(data.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < data.size(); ++i) {
    SampleScore& s = r.samples[i];
    s.index = data[i].entry.index;
    const ShapeGMM pred = predict_shape(m, data[i].sketch, data[i].desc);
    s.param_l1 = gmm_param_l1(pred, data[i].shape);
    try {
      MetricOptions o = opt;
      o.seed = mix_seed(opt.seed, s.index);
      s.metrics = sampled_metrics(pred, data[i].shape, o);
      s.ok = true;
    } catch (const MetricError&) {
      s.ok = false;
    }
  }
  std::vector<double> cd, em;
  double fid = 0.0, l1 = 0.0;
  for (const auto& s : r.samples) {
    l1 += s.param_l1;
    if (!s.ok) {
      ++r.failures;
      continue;
    }
    cd.push_back(s.metrics.cd);
    em.push_back(s.metrics.emd);
    if (s.metrics.fid_lite) fid += *s.metrics.fid_lite;
  }
  if (!data.empty()) r.mean_param_l1 = l1 / static_cast<double>(data.size());
  if (!cd.empty()) {
    const double k = static_cast<double>(cd.size());
    r.median_cd = median(cd);
    r.median_emd = median(em);
    for (std::size_t i = 0; i < cd.size(); ++i) {
      r.mean_cd += cd[i] / k;
      r.mean_emd += em[i] / k;
    }
    if (opt.with_fid) r.mean_fid_lite = fid / k;
  }
  return r;
}

nlohmann::json eval_to_json(const EvalReport& r) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& s : r.samples) {
    nlohmann::json j{{"index", s.index}, {"ok", s.ok}, {"param_l1", s.param_l1}};
    if (s.ok) j["metrics"] = report_to_json(s.metrics);
    per.push_back(j);
  }
  nlohmann::json out{{"count", r.samples.size()},
                     {"failures", r.failures},
                     {"median_cd", r.median_cd},
                     {"median_emd", r.median_emd},
                     {"mean_cd", r.mean_cd},
                     {"mean_emd", r.mean_emd},
                     {"mean_param_l1", r.mean_param_l1},
                     {"points", r.options.points},
                     {"emd_subsample", r.options.emd_subsample},
                     {"seed", r.options.seed},
                     {"samples", per}};
  out["mean_fid_lite"] = r.mean_fid_lite ? nlohmann::json(*r.mean_fid_lite) : nlohmann::json(nullptr);
  return out;
}

}  // namespace partsketch
