#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "clothdiff/nn/modules.hpp"

namespace clothdiff {

struct TrainConfig {
  int steps = 2000;
  int batch_size = 8;
  double lr = 1e-3;
  int warmup_steps = 100;
  double final_lr_frac = 0.1;  // cosine decay floor
  uint64_t seed = 0;
  int threads = 2;
  int log_every = 100;
};

struct TrainResult {
  std::vector<double> losses;  // per step, batch mean

  // trailing moving average
  double smoothed_loss(int window = 100) const;
};

// Adam over a ParamStore's entries, moments keyed by entry order.
class Adam {
 public:
  explicit Adam(nn::ParamStore& store, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(double lr, const std::vector<std::vector<double>>& grads);

 private:
  nn::ParamStore& store_;
  double beta1_, beta2_, eps_;
  int64_t t_{0};
  std::vector<std::vector<double>> m_, v_;
};

double lr_at_step(const TrainConfig& cfg, int step);

// Data-parallel training loop. `stores` holds the master parameter store
// (slot 0) and one clone per extra worker; clones are value-synced from the
// master every step. `item_loss(slot, record, rng)` must build the loss on
// slot's parameters. Per-item gradients are reduced in item order, so the
// result is bit-identical for any thread count.
TrainResult run_training(std::vector<nn::ParamStore*> stores,
                         const std::function<nn::Tensor(int, int, Rng&)>& item_loss, int n_records,
                         const TrainConfig& cfg,
                         const std::function<void(int, double)>& on_step = {});

}  // namespace clothdiff
