#pragma once

#include <functional>
#include <vector>

#include "clothdiff/nn/ops.hpp"
#include "clothdiff/nn/tensor.hpp"
#include "clothdiff/rng.hpp"

namespace clothdiff {

// DDPM variance schedule. betas are 1-based conceptually: beta(k) for
// k in [1, T]; alpha_bar(k) = prod_{s<=k} (1 - beta_s), alpha_bar(0) = 1.
struct NoiseSchedule {
  int steps{0};
  std::vector<double> betas;
  std::vector<double> alphas_bar;

  static NoiseSchedule linear(int steps, double beta_start, double beta_end);
  // Default: terminal marginal close to N(0, I) at 100 steps.
  static NoiseSchedule default_schedule() { return linear(100, 1e-4, 0.06); }

  double beta(int k) const;
  double alpha_bar(int k) const;  // alpha_bar(0) == 1
  void validate() const;
};

// sqrt(abar_k) * s0 + sqrt(1 - abar_k) * eps. Differentiable in s0 and eps.
nn::Tensor forward_noise(const nn::Tensor& s0, int k, const nn::Tensor& eps, const NoiseSchedule& schedule);

// Noise predictor: (noisy_state, k) -> predicted eps, with any conditioning
// bound into the closure.
using DenoiseFn = std::function<nn::Tensor(const nn::Tensor&, int)>;

// Ancestral DDPM sampling from pure noise down to the clean state.
//   s_{k-1} = (s_k - beta_k/sqrt(1-abar_k) * eps_hat) / sqrt(1-beta_k) + sigma_k z
//   sigma_k^2 = beta_k * (1 - abar_{k-1}) / (1 - abar_k), z = 0 at k = 1.
nn::Tensor ddpm_sample(const DenoiseFn& denoise, const std::vector<int>& shape,
                       const NoiseSchedule& schedule, Rng& rng, bool deterministic_last_step = true);

// eps-prediction objective for one sample: draw k ~ U[1,T] and eps ~ N(0,I),
// return mean || eps - model(forward_noise(s0,k,eps), k) ||^2.
nn::Tensor diffusion_training_loss(const DenoiseFn& denoise, const nn::Tensor& s0,
                                   const NoiseSchedule& schedule, Rng& rng);

// Sinusoidal step embedding, interleaved (sin, cos) pairs.
nn::Tensor step_embedding(int k, int dim);

}  // namespace clothdiff
