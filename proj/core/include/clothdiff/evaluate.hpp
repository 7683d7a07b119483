#pragma once

#include <map>
#include <string>
#include <vector>

#include "clothdiff/dataset.hpp"

namespace clothdiff {

struct MetricStats {
  double mean{0.0};
  double ci95{0.0};  // 1.96 * sample std / sqrt(n)
  int n{0};
};

MetricStats metric_stats(const std::vector<double>& values);

struct EvalReport {
  std::string kind;
  std::map<std::string, MetricStats> metrics;
  // per-record rows, fixed column order for the CSV
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::string to_json_string() const;
  std::string to_csv_string() const;
};

// Reconstruction metrics of DPM estimates against ground truth.
EvalReport evaluate_dpm(const DpmModel& model, const std::vector<PerceptionPair>& pairs, Rng& rng,
                        int n_samples = 1);

// Autoregressive rollout error over time on dataset trajectories, plus
// final-state metrics. Steps limited to max_steps (0: full trajectories).
struct RolloutEval {
  EvalReport report;                            // per-trajectory final metrics
  std::vector<std::vector<double>> mse_curves;  // per trajectory, per action step
};

RolloutEval evaluate_ddm_rollout(const DdmModel& model, const std::vector<TrajectoryRecord>& trajectories,
                                 Rng& rng, int max_steps = 0);

// (step, mean, ci95) rows over a set of per-step series (ragged allowed;
// each step aggregates the series that reach it).
std::string emit_step_series_csv(const std::vector<std::vector<double>>& series,
                                 const std::string& value_name);

}  // namespace clothdiff
