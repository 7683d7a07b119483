#include "clothdiff/evaluate.hpp"

#include <cmath>
#include <json.hpp>
#include <sstream>

#include "clothdiff/error.hpp"
#include "clothdiff/metrics.hpp"

namespace clothdiff {

using nlohmann::json;

MetricStats metric_stats(const std::vector<double>& values) {
  MetricStats s;
  s.n = static_cast<int>(values.size());
  if (s.n == 0) return s;
  for (double v : values) s.mean += v;
  s.mean /= s.n;
  if (s.n > 1) {
    double var = 0.0;
    for (double v : values) var += (v - s.mean) * (v - s.mean);
    var /= (s.n - 1);
    s.ci95 = 1.96 * std::sqrt(var) / std::sqrt(static_cast<double>(s.n));
  }
  return s;
}

std::string EvalReport::to_json_string() const {
  json j;
  j["kind"] = kind;
  json jm;
  for (const auto& [name, st] : metrics)
    jm[name] = {{"mean", st.mean}, {"ci95", st.ci95}, {"n", st.n}};
  j["metrics"] = jm;
  return j.dump(2);
}

std::string EvalReport::to_csv_string() const {
  std::ostringstream out;
  for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
  out << "\n";
  char buf[64];
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.12g", row[c]);
      out << (c ? "," : "") << buf;
    }
    out << "\n";
  }
  return out.str();
}

EvalReport evaluate_dpm(const DpmModel& model, const std::vector<PerceptionPair>& pairs, Rng& rng,
                        int n_samples) {
  if (pairs.empty()) throw DomainError("evaluate_dpm: empty dataset");
  EvalReport report;
  report.kind = "perception";
  report.columns = {"record", "mse", "cd", "emd"};
  std::vector<double> mses, cds, emds;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const ClothMesh estimate = model.estimate_state(pairs[i].cloud, rng, n_samples);
    const double m = mse(estimate, pairs[i].mesh);
    const double c = chamfer(estimate.vertices, pairs[i].mesh.vertices);
    const double e = emd(estimate.vertices, pairs[i].mesh.vertices);
    mses.push_back(m);
    cds.push_back(c);
    emds.push_back(e);
    report.rows.push_back({static_cast<double>(i), m, c, e});
  }
  report.metrics["mse"] = metric_stats(mses);
  report.metrics["cd"] = metric_stats(cds);
  report.metrics["emd"] = metric_stats(emds);
  return report;
}

RolloutEval evaluate_ddm_rollout(const DdmModel& model, const std::vector<TrajectoryRecord>& trajectories,
                                 Rng& rng, int max_steps) {
  if (trajectories.empty()) throw DomainError("evaluate_ddm_rollout: empty trajectory set");
  const int hist = model.config().history_frames + 1;

  RolloutEval eval;
  eval.report.kind = "dynamics";
  eval.report.columns = {"record", "mse", "cd", "emd"};
  std::vector<double> mses, cds, emds;

  for (std::size_t ti = 0; ti < trajectories.size(); ++ti) {
    const TrajectoryRecord& tr = trajectories[ti];
    if (static_cast<int>(tr.actions.size()) < hist + 1) continue;

    // first `hist` states seed the window; predict the rest
    std::vector<ClothMesh> window;
    for (int f = 0; f < hist; ++f) {
      ClothMesh m = model.canonical();
      m.vertices = tr.states[f];
      window.push_back(std::move(m));
    }
    std::vector<ActionStep> actions(tr.actions.begin() + (hist - 1), tr.actions.end());
    if (max_steps > 0 && static_cast<int>(actions.size()) > max_steps) actions.resize(max_steps);

    const std::vector<ClothMesh> preds = model.rollout_autoregressive(window, actions, rng);

    std::vector<double> curve;
    for (std::size_t s = 0; s < preds.size(); ++s) {
      const std::vector<Vec3>& truth = tr.states[hist + s];
      curve.push_back(mse(preds[s].vertices, truth));
    }
    eval.mse_curves.push_back(curve);

    const std::vector<Vec3>& final_truth = tr.states[hist - 1 + preds.size()];
    const double m = mse(preds.back().vertices, final_truth);
    const double c = chamfer(preds.back().vertices, final_truth);
    const double e = emd(preds.back().vertices, final_truth);
    mses.push_back(m);
    cds.push_back(c);
    emds.push_back(e);
    eval.report.rows.push_back({static_cast<double>(ti), m, c, e});
  }
  if (mses.empty()) throw DomainError("evaluate_ddm_rollout: no trajectory long enough for the window");
  eval.report.metrics["mse"] = metric_stats(mses);
  eval.report.metrics["cd"] = metric_stats(cds);
  eval.report.metrics["emd"] = metric_stats(emds);
  return eval;
}

std::string emit_step_series_csv(const std::vector<std::vector<double>>& series,
                                 const std::string& value_name) {
  std::size_t max_len = 0;
  for (const auto& s : series) max_len = std::max(max_len, s.size());
  std::ostringstream out;
  out << "step," << value_name << "_mean," << value_name << "_ci95\n";
  char buf[64];
  for (std::size_t step = 0; step < max_len; ++step) {
    std::vector<double> vals;
    for (const auto& s : series)
      if (step < s.size()) vals.push_back(s[step]);
    const MetricStats st = metric_stats(vals);
    std::snprintf(buf, sizeof(buf), "%zu,%.12g,%.12g", step, st.mean, st.ci95);
    out << buf << "\n";
  }
  return out.str();
}

}  // namespace clothdiff
