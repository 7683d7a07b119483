#include "clothdiff/train.hpp"

#include <cmath>
#include <thread>

#include "clothdiff/error.hpp"

namespace clothdiff {

double TrainResult::smoothed_loss(int window) const {
  if (losses.empty()) return 0.0;
  const int n = std::min<int>(window, static_cast<int>(losses.size()));
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += losses[losses.size() - 1 - i];
  return acc / n;
}

Adam::Adam(nn::ParamStore& store, double beta1, double beta2, double eps)
    : store_(store), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& [name, t] : store.entries()) {
    m_.emplace_back(t.numel(), 0.0);
    v_.emplace_back(t.numel(), 0.0);
  }
}

void Adam::step(double lr, const std::vector<std::vector<double>>& grads) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const auto& entries = store_.entries();
  for (std::size_t p = 0; p < entries.size(); ++p) {
    auto& values = const_cast<nn::Tensor&>(entries[p].second).mutable_values();
    const auto& g = grads[p];
    for (std::size_t i = 0; i < values.size(); ++i) {
      m_[p][i] = beta1_ * m_[p][i] + (1.0 - beta1_) * g[i];
      v_[p][i] = beta2_ * v_[p][i] + (1.0 - beta2_) * g[i] * g[i];
      values[i] -= lr * (m_[p][i] / bc1) / (std::sqrt(v_[p][i] / bc2) + eps_);
    }
  }
}

double lr_at_step(const TrainConfig& cfg, int step) {
  if (cfg.warmup_steps > 0 && step < cfg.warmup_steps)
    return cfg.lr * (step + 1) / static_cast<double>(cfg.warmup_steps);
  const double progress =
      cfg.steps > cfg.warmup_steps
          ? static_cast<double>(step - cfg.warmup_steps) / static_cast<double>(cfg.steps - cfg.warmup_steps)
          : 0.0;
  const double cosine = 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
  return cfg.lr * (cfg.final_lr_frac + (1.0 - cfg.final_lr_frac) * cosine);
}

namespace {

// Copy gradients (zeros when absent) out of a store and clear them.
void extract_grads(nn::ParamStore& store, std::vector<std::vector<double>>& out) {
  const auto& entries = store.entries();
  out.resize(entries.size());
  for (std::size_t p = 0; p < entries.size(); ++p) {
    const nn::Tensor& t = entries[p].second;
    if (t.has_grad())
      out[p] = t.grad();
    else
      out[p].assign(t.numel(), 0.0);
  }
  store.zero_grads();
}

void sync_values(const nn::ParamStore& master, nn::ParamStore& clone) {
  const auto& src = master.entries();
  const auto& dst = clone.entries();
  if (src.size() != dst.size()) throw DomainError("trainer: clone store layout mismatch");
  for (std::size_t p = 0; p < src.size(); ++p)
    const_cast<nn::Tensor&>(dst[p].second).mutable_values() = src[p].second.values();
}

}  // namespace

TrainResult run_training(std::vector<nn::ParamStore*> stores,
                         const std::function<nn::Tensor(int, int, Rng&)>& item_loss, int n_records,
                         const TrainConfig& cfg, const std::function<void(int, double)>& on_step) {
  if (stores.empty()) throw DomainError("trainer: no parameter stores");
  if (n_records < 1) throw DomainError("trainer: empty dataset");
  nn::ParamStore& master = *stores[0];
  Adam opt(master);
  const int workers = std::max(1, std::min<int>(cfg.threads, static_cast<int>(stores.size())));

  TrainResult result;
  result.losses.reserve(cfg.steps);

  std::vector<std::vector<std::vector<double>>> item_grads(cfg.batch_size);
  std::vector<double> item_losses(cfg.batch_size);

  for (int step = 0; step < cfg.steps; ++step) {
    const uint64_t step_seed = Rng::derive_seed(cfg.seed, static_cast<uint64_t>(step));
    Rng pick_rng(step_seed);
    std::vector<int> records(cfg.batch_size);
    std::vector<uint64_t> item_seeds(cfg.batch_size);
    for (int i = 0; i < cfg.batch_size; ++i) {
      records[i] = static_cast<int>(pick_rng.index(static_cast<std::size_t>(n_records)));
      item_seeds[i] = Rng::derive_seed(step_seed, 1000 + static_cast<uint64_t>(i));
    }

    for (int w = 1; w < workers; ++w) sync_values(master, *stores[w]);

    const auto process_range = [&](int slot, int begin, int end) {
      for (int i = begin; i < end; ++i) {
        Rng rng(item_seeds[i]);
        nn::Tensor loss = item_loss(slot, records[i], rng);
        item_losses[i] = loss.item();
        nn::backward(loss);
        extract_grads(*stores[slot], item_grads[i]);
      }
    };

    if (workers == 1) {
      process_range(0, 0, cfg.batch_size);
    } else {
      std::vector<std::thread> pool;
      const int per = (cfg.batch_size + workers - 1) / workers;
      for (int w = 0; w < workers; ++w) {
        const int begin = w * per;
        const int end = std::min(cfg.batch_size, begin + per);
        if (begin >= end) break;
        pool.emplace_back(process_range, w, begin, end);
      }
      for (auto& t : pool) t.join();
    }

    // reduce per-item grads in item order: independent of the thread count
    std::vector<std::vector<double>> total = std::move(item_grads[0]);
    for (int i = 1; i < cfg.batch_size; ++i)
      for (std::size_t p = 0; p < total.size(); ++p)
        for (std::size_t x = 0; x < total[p].size(); ++x) total[p][x] += item_grads[i][p][x];
    const double inv_batch = 1.0 / cfg.batch_size;
    for (auto& g : total)
      for (auto& x : g) x *= inv_batch;

    double mean_loss = 0.0;
    for (int i = 0; i < cfg.batch_size; ++i) mean_loss += item_losses[i];
    mean_loss *= inv_batch;
    if (!std::isfinite(mean_loss))
      throw NumericalError("training aborted: non-finite loss at step " + std::to_string(step));

    opt.step(lr_at_step(cfg, step), total);
    result.losses.push_back(mean_loss);
    if (on_step && (step % std::max(1, cfg.log_every) == 0 || step + 1 == cfg.steps))
      on_step(step, mean_loss);
  }
  return result;
}

}  // namespace clothdiff
