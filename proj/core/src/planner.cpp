#include "clothdiff/planner.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "clothdiff/error.hpp"
#include "clothdiff/metrics.hpp"

namespace clothdiff {

void PlannerConfig::validate() const {
  if (n_iterations < 1 || n_samples < 1 || seq_length < 1)
    throw ConfigError("planner: N, K, L must be >= 1");
  if (n_samples % 2 != 0) throw ConfigError("planner: K must be even (half Gaussian, half uniform)");
  if (!(init_std > 0.0)) throw ConfigError("planner: sigma_0 must be > 0");
  if (!(action_max > action_min)) throw ConfigError("planner: empty action bounds");
}

std::vector<double> grasp_probabilities(const ClothMesh& current, const ClothMesh& target, double tau_g) {
  if (current.num_vertices() != target.num_vertices())
    throw DomainError("grasp softmax: vertex count mismatch");
  const int nv = current.num_vertices();
  std::vector<double> logits(nv);
  double mx = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < nv; ++i) {
    logits[i] = norm(target.vertices[i] - current.vertices[i]) / tau_g;
    mx = std::max(mx, logits[i]);
  }
  double total = 0.0;
  for (double& l : logits) {
    l = std::exp(l - mx);
    total += l;
  }
  for (double& l : logits) l /= total;
  return logits;
}

int select_grasp(const ClothMesh& current, const ClothMesh& target, double tau_g, Rng& rng) {
  const std::vector<double> p = grasp_probabilities(current, target, tau_g);
  double pick = rng.uniform();
  for (std::size_t i = 0; i < p.size(); ++i) {
    pick -= p[i];
    if (pick <= 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(p.size()) - 1;
}

Vec3 informed_direction(const ClothMesh& current, const ClothMesh& target, int grasp_index, int k,
                        double epsilon) {
  if (current.num_vertices() != target.num_vertices())
    throw DomainError("informed direction: vertex count mismatch");
  const int nv = current.num_vertices();
  if (k > nv) k = nv;
  if (grasp_index < 0 || grasp_index >= nv) throw DomainError("informed direction: bad grasp index");

  std::vector<std::pair<double, int>> err(nv);
  for (int i = 0; i < nv; ++i) err[i] = {-norm2(target.vertices[i] - current.vertices[i]), i};
  std::partial_sort(err.begin(), err.begin() + k, err.end());

  const Vec3 pg = current.vertices[grasp_index];
  Vec3 d{};
  for (int j = 0; j < k; ++j) {
    const int i = err[j].second;
    const double w = 1.0 / (norm(pg - current.vertices[i]) + epsilon);
    d += w * (target.vertices[i] - current.vertices[i]);
  }
  return d;
}

namespace {

double sequence_cost(const std::vector<ClothMesh>& predicted, const std::vector<ActionStep>& actions,
                     const ClothMesh& target, const PlannerConfig& cfg) {
  const ClothMesh& last = predicted.back();
  double cost = cfg.w_mse * mse(last, target) + cfg.w_cd * chamfer(last.vertices, target.vertices);
  for (std::size_t t = 1; t < actions.size(); ++t)
    cost += cfg.w_smooth * norm2(actions[t].delta - actions[t - 1].delta);
  return cost;
}

}  // namespace

PlanResult plan(const DynamicsOracle& dynamics, const std::vector<ClothMesh>& history,
                const ClothMesh& target, int grasp_index, const PlannerConfig& cfg, Rng& rng) {
  cfg.validate();
  if (history.empty()) throw DomainError("plan: empty state history");
  const ClothMesh& current = history.back();
  const int L = cfg.seq_length;
  const int K = cfg.n_samples;

  // informed mean along d_main, magnitude matched to the remaining error:
  // rms displacement of the informed_k worst vertices spread over L steps,
  // capped at the mid-range per-axis magnitude
  std::vector<Vec3> mu(L, Vec3{});
  {
    const Vec3 d = informed_direction(current, target, grasp_index, cfg.informed_k, cfg.epsilon);
    if (norm(d) > 1e-12) {
      const int nv = current.num_vertices();
      const int k = std::min(cfg.informed_k, nv);
      std::vector<double> errs(nv);
      for (int i = 0; i < nv; ++i) errs[i] = norm2(target.vertices[i] - current.vertices[i]);
      std::nth_element(errs.begin(), errs.begin() + (k - 1), errs.end(), std::greater<double>());
      double top = 0.0;
      for (int i = 0; i < k; ++i) top += errs[i];
      const double rms_disp = std::sqrt(top / k);
      const Vec3 m = normalized(d) * (rms_disp / L);
      // lift-then-descend arc prior over the horizontal travel: folds and
      // pick-place moves clear the surface instead of dragging across it
      const double horiz = L * std::hypot(m.x, m.y);
      const double arc_h = 0.5 * horiz;
      constexpr double kPi = 3.14159265358979323846;
      for (int t = 0; t < L; ++t) {
        const double dz =
            arc_h * (std::sin(kPi * (t + 1) / L) - std::sin(kPi * t / L));
        mu[t] = {std::clamp(m.x, cfg.action_min, cfg.action_max),
                 std::clamp(m.y, cfg.action_min, cfg.action_max),
                 std::clamp(m.z + dz, cfg.action_min, cfg.action_max)};
      }
    }
  }
  double sigma = cfg.init_std;

  PlanResult result;
  result.grasp_index = grasp_index;
  result.best_cost = std::numeric_limits<double>::infinity();

  std::vector<std::vector<ActionStep>> samples(K);
  std::vector<double> costs(K);
  std::vector<uint64_t> eval_seeds(K);

  for (int iter = 1; iter <= cfg.n_iterations; ++iter) {
    for (int s = 0; s < K; ++s) {
      std::vector<ActionStep>& seq = samples[s];
      // the zero candidate releases the grasp entirely
      seq.assign(L, ActionStep{s == K - 1 ? -1 : grasp_index, Vec3{}});
      const bool gaussian = s < K / 2;
      // Gaussian half: sample 0 evaluates the mean itself; the others form
      // antithetic pairs (2,3), (4,5), ... around the mean. The last
      // uniform slot is the zero sequence, so standing still is always a
      // candidate and a poor grasp draw cannot force a harmful chunk.
      const bool mirror = gaussian && s >= 3 && (s % 2 == 1);
      const bool zero_candidate = s == K - 1;
      for (int t = 0; t < L; ++t) {
        for (int axis = 0; axis < 3; ++axis) {
          double v;
          if (s == 0)
            v = mu[t][axis];
          else if (mirror)
            v = 2.0 * mu[t][axis] - samples[s - 1][t].delta[axis];
          else if (gaussian)
            v = mu[t][axis] + sigma * rng.normal();
          else if (zero_candidate)
            v = 0.0;
          else
            v = rng.uniform(cfg.action_min, cfg.action_max);
          seq[t].delta[axis] = std::clamp(v, cfg.action_min, cfg.action_max);
        }
      }
      eval_seeds[s] = rng.next_u64();
    }

    const auto evaluate = [&](int s) {
      Rng eval_rng(eval_seeds[s]);
      const std::vector<ClothMesh> predicted = dynamics(history, samples[s], eval_rng);
      if (predicted.empty()) throw NumericalError("plan: oracle returned no states for sample " +
                                                  std::to_string(s));
      costs[s] = sequence_cost(predicted, samples[s], target, cfg);
    };

    if (cfg.threads > 1) {
      std::vector<std::thread> pool;
      const int per = (K + cfg.threads - 1) / cfg.threads;
      for (int w = 0; w < cfg.threads; ++w) {
        const int begin = w * per, end = std::min(K, begin + per);
        if (begin >= end) break;
        pool.emplace_back([&, begin, end] {
          for (int s = begin; s < end; ++s) evaluate(s);
        });
      }
      for (auto& t : pool) t.join();
    } else {
      for (int s = 0; s < K; ++s) evaluate(s);
    }

    double c_min = costs[0], c_max = costs[0];
    int argmin = 0;
    for (int s = 0; s < K; ++s) {
      if (costs[s] < c_min) {
        c_min = costs[s];
        argmin = s;
      }
      c_max = std::max(c_max, costs[s]);
    }
    if (c_min < result.best_cost) {
      result.best_cost = c_min;
      result.best_actions = samples[argmin];
    }
    result.cost_history.push_back(c_min);

    // exponentially cost-weighted mean update. Costs are normalized by the
    // iteration's spread so the temperature acts on a dimensionless scale;
    // the running best sequence joins the update as a virtual sample so the
    // mean cannot drift away from the best region found so far.
    const double denom = 0.04 * cfg.temperature * std::max(c_max - c_min, 1e-12);
    double w_total = 0.0;
    std::vector<Vec3> mu_next(L, Vec3{});
    for (int s = 0; s < K; ++s) {
      const double w = std::exp(-(costs[s] - c_min) / denom);
      w_total += w;
      for (int t = 0; t < L; ++t) mu_next[t] += w * samples[s][t].delta;
    }
    {
      const double w = std::exp(-(result.best_cost - c_min) / denom);
      w_total += w;
      for (int t = 0; t < L; ++t) mu_next[t] += w * result.best_actions[t].delta;
    }
    for (int t = 0; t < L; ++t) mu[t] = mu_next[t] / w_total;

    sigma *= 1.0 - static_cast<double>(iter) / cfg.n_iterations;  // anneal exploration
    result.sigma_history.push_back(sigma);
  }
  return result;
}

}  // namespace clothdiff
