#include "clothdiff/diffusion.hpp"

#include <cmath>
#include <string>

#include "clothdiff/error.hpp"

namespace clothdiff {

using nn::Tensor;

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw ConfigError("noise schedule: steps must be >= 1");
  NoiseSchedule s;
  s.steps = steps;
  s.betas.resize(steps);
  s.alphas_bar.resize(steps);
  double abar = 1.0;
  for (int k = 0; k < steps; ++k) {
    const double beta =
        steps == 1 ? beta_start : beta_start + (beta_end - beta_start) * k / static_cast<double>(steps - 1);
    s.betas[k] = beta;
    abar *= 1.0 - beta;
    s.alphas_bar[k] = abar;
  }
  s.validate();
  return s;
}

double NoiseSchedule::beta(int k) const {
  if (k < 1 || k > steps) throw DomainError("noise schedule: step " + std::to_string(k) + " out of [1," +
                                            std::to_string(steps) + "]");
  return betas[k - 1];
}

double NoiseSchedule::alpha_bar(int k) const {
  if (k == 0) return 1.0;
  if (k < 0 || k > steps) throw DomainError("noise schedule: step " + std::to_string(k) + " out of range");
  return alphas_bar[k - 1];
}

void NoiseSchedule::validate() const {
  if (static_cast<int>(betas.size()) != steps || static_cast<int>(alphas_bar.size()) != steps)
    throw ConfigError("noise schedule: inconsistent sizes");
  for (int k = 0; k < steps; ++k) {
    if (!(betas[k] > 0.0 && betas[k] < 1.0)) throw ConfigError("noise schedule: beta out of (0,1)");
    if (k > 0 && betas[k] < betas[k - 1]) throw ConfigError("noise schedule: betas must be non-decreasing");
    if (!(alphas_bar[k] > 0.0 && alphas_bar[k] < 1.0))
      throw ConfigError("noise schedule: alpha_bar out of (0,1)");
    if (k > 0 && alphas_bar[k] >= alphas_bar[k - 1])
      throw ConfigError("noise schedule: alpha_bar must decrease");
  }
}

Tensor forward_noise(const Tensor& s0, int k, const Tensor& eps, const NoiseSchedule& schedule) {
  if (s0.shape() != eps.shape())
    throw DomainError("forward_noise: eps shape " + nn::shape_str(eps.shape()) + " != s0 shape " +
                      nn::shape_str(s0.shape()));
  const double abar = schedule.alpha_bar(k);  // validates k
  if (k < 1) throw DomainError("forward_noise: k must be >= 1");
  return nn::add(nn::scale(s0, std::sqrt(abar)), nn::scale(eps, std::sqrt(1.0 - abar)));
}

Tensor ddpm_sample(const DenoiseFn& denoise, const std::vector<int>& shape, const NoiseSchedule& schedule,
                   Rng& rng, bool deterministic_last_step) {
  nn::NoGradGuard no_grad;
  Tensor s = Tensor::randn(shape, rng);
  for (int k = schedule.steps; k >= 1; --k) {
    const Tensor eps_hat = denoise(s, k);
    if (eps_hat.shape() != s.shape()) throw DomainError("ddpm_sample: model output shape mismatch");
    const double beta = schedule.beta(k);
    const double abar = schedule.alpha_bar(k);
    const double abar_prev = schedule.alpha_bar(k - 1);
    const double coef = beta / std::sqrt(1.0 - abar);
    const double inv = 1.0 / std::sqrt(1.0 - beta);
    const double sigma = k > 1 ? std::sqrt(beta * (1.0 - abar_prev) / (1.0 - abar)) : 0.0;
    const bool add_noise = k > 1 || !deterministic_last_step;

    const auto& ev = eps_hat.values();
    std::vector<double> next(s.numel());
    const auto& sv = s.values();
    for (std::size_t i = 0; i < next.size(); ++i) {
      if (!std::isfinite(ev[i]))
        throw NumericalError("ddpm_sample: non-finite model output at step " + std::to_string(k));
      next[i] = (sv[i] - coef * ev[i]) * inv;
      if (add_noise && sigma > 0.0) next[i] += sigma * rng.normal();
    }
    s = Tensor::from_values(shape, std::move(next));
  }
  return s;
}

Tensor diffusion_training_loss(const DenoiseFn& denoise, const Tensor& s0, const NoiseSchedule& schedule,
                               Rng& rng) {
  const int k = static_cast<int>(rng.uniform_int(1, schedule.steps));
  const Tensor eps = Tensor::randn(s0.shape(), rng);
  const Tensor noisy = forward_noise(s0, k, eps, schedule);
  const Tensor eps_hat = denoise(noisy, k);
  return nn::mse_loss(eps_hat, eps);
}

Tensor step_embedding(int k, int dim) {
  if (dim % 2 != 0) throw DomainError("step_embedding: dim must be even");
  std::vector<double> v(dim);
  for (int i = 0; i < dim / 2; ++i) {
    const double freq = std::pow(10000.0, -2.0 * i / static_cast<double>(dim));
    v[2 * i] = std::sin(k * freq);
    v[2 * i + 1] = std::cos(k * freq);
  }
  return Tensor::from_values({dim}, std::move(v));
}

}  // namespace clothdiff
