#include "clothdiff/mpc.hpp"

#include <algorithm>

#include "clothdiff/error.hpp"
#include "clothdiff/metrics.hpp"

namespace clothdiff {

DynamicsOracle make_sim_oracle(const ClothMesh& rest_mesh, const SimParams& params) {
  return [rest_mesh, params](const std::vector<ClothMesh>& history, const std::vector<ActionStep>& actions,
                             Rng&) {
    ClothSim sim(rest_mesh, params);
    sim.set_positions(history.back().vertices);
    return sim.rollout(actions);
  };
}

namespace {

EpisodeResult run_episode(ClothSim& sim, const ClothMesh& target, int max_steps, double success_frac,
                          const std::function<std::vector<ActionStep>(const ClothMesh&, Rng&)>& next_chunk,
                          Rng& rng) {
  EpisodeResult result;
  const double initial_emd = emd(sim.mesh().vertices, target.vertices);
  result.threshold = success_frac * initial_emd;
  result.emd_curve.push_back(initial_emd);
  if (initial_emd <= result.threshold) {
    result.success = true;
    result.success_step = 0;
    return result;
  }

  int steps = 0;
  while (steps < max_steps) {
    const std::vector<ActionStep> chunk = next_chunk(sim.mesh(), rng);
    if (chunk.empty()) throw DomainError("episode: planner returned an empty chunk");
    for (const ActionStep& action : chunk) {
      if (steps >= max_steps) break;
      sim.apply_action(action);
      result.actions.push_back(action);
      ++steps;
      const double e = emd(sim.mesh().vertices, target.vertices);
      result.emd_curve.push_back(e);
      if (!result.success && e <= result.threshold) {
        result.success = true;
        result.success_step = steps;
      }
    }
    if (result.success) break;
  }
  return result;
}

}  // namespace

EpisodeResult mpc_episode(ClothSim& sim, const StateEstimator& estimator, const DynamicsOracle& dynamics,
                          const ClothMesh& target, int max_steps, const PlannerConfig& config, Rng& rng,
                          double success_frac) {
  // estimated-state history for dynamics conditioning; replicated while
  // shorter than the window the oracle may want
  std::vector<ClothMesh> believed;
  const auto next_chunk = [&](const ClothMesh& true_state, Rng& r) {
    const ClothMesh estimate = estimator(true_state, r);
    believed.push_back(estimate);
    if (believed.size() > 8) believed.erase(believed.begin());
    const int grasp = select_grasp(estimate, target, config.grasp_temperature, r);
    const PlanResult pr = plan(dynamics, believed, target, grasp, config, r);
    return pr.best_actions;
  };
  return run_episode(sim, target, max_steps, success_frac, next_chunk, rng);
}

ClothMesh scripted_fold_target(const ClothMesh& rest_mesh, const SimParams& params, int corner_from,
                               int corner_to, int steps, int extra_settle) {
  ClothSim sim(rest_mesh, params);
  for (int s = 0; s < params.settle_substeps; ++s) sim.step();

  const Vec3 a = sim.mesh().vertices[corner_from];
  const Vec3 b = sim.mesh().vertices[corner_to];
  const double height = 0.5 * norm(b - a);
  std::vector<ActionStep> actions;
  Vec3 prev = a;
  for (int t = 1; t <= steps; ++t) {
    const double u = static_cast<double>(t) / steps;
    Vec3 p = a + u * (b - a);
    p.z += height * std::sin(3.14159265358979323846 * u);
    actions.push_back(ActionStep{corner_from, p - prev});
    prev = p;
  }
  sim.rollout(actions);
  for (int s = 0; s < extra_settle; ++s) sim.step();
  return sim.mesh();
}

EpisodeResult random_episode(ClothSim& sim, const ClothMesh& target, int max_steps,
                             const PlannerConfig& config, Rng& rng, double success_frac) {
  const auto next_chunk = [&](const ClothMesh& state, Rng& r) {
    const int grasp = static_cast<int>(r.index(state.vertices.size()));
    std::vector<ActionStep> chunk(config.seq_length);
    for (auto& a : chunk) {
      a.grasp_index = grasp;
      for (int axis = 0; axis < 3; ++axis)
        a.delta[axis] = r.uniform(config.action_min, config.action_max);
    }
    return chunk;
  };
  return run_episode(sim, target, max_steps, success_frac, next_chunk, rng);
}

}  // namespace clothdiff
