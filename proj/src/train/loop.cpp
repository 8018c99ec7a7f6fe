#include "dodrom/train/loop.hpp"

#include <algorithm>
#include <cmath>

namespace dodrom::train {

std::vector<Index> permutation(Index n, std::mt19937_64& rng) {
  std::vector<Index> p(std::size_t(std::max<Index>(n, 0)));
  for (Index i = 0; i < n; ++i) p[std::size_t(i)] = i;
  for (Index i = n - 1; i > 0; --i) {
    const auto j = Index(rng() % std::uint64_t(i + 1));
    std::swap(p[std::size_t(i)], p[std::size_t(j)]);
  }
  return p;
}

Split split_units(Index n, double alpha, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("split_units: nothing to split");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("split_units: alpha must lie in (0, 1]");
  std::mt19937_64 rng(seed);
  const auto p = permutation(n, rng);
  Index n_train = Index(std::llround(alpha * double(n)));
  if (n >= 2) n_train = std::clamp<Index>(n_train, 1, n - 1);
  else n_train = 1;
  Split s;
  s.train.assign(p.begin(), p.begin() + n_train);
  s.validation.assign(p.begin() + n_train, p.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.validation.begin(), s.validation.end());
  return s;
}

TrainHistory run_training(std::span<const ParamRef> params, Index n_train, const TrainConfig& cfg,
                          const BatchLoss& batch_loss, const Validation& validation) {
  if (n_train < 1) throw std::invalid_argument("run_training: no training data");
  if (cfg.batch_size < 1) throw std::invalid_argument("run_training: batch size must be positive");
  AdamWConfig acfg;
  acfg.lr = cfg.lr;
  acfg.weight_decay = cfg.weight_decay;
  OptimizerState opt(params, acfg);
  SchedulerState sched(cfg.plateau);
  std::mt19937_64 rng(cfg.shuffle_seed);

  TrainHistory h;
  std::vector<Matrix> best;
  auto snapshot = [&] {
    best.clear();
    for (const auto& p : params) best.push_back(p.tensor->values);
  };
  snapshot();

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const auto order = permutation(n_train, rng);
    double total = 0.0;
    for (Index start = 0; start < n_train; start += cfg.batch_size) {
      const Index count = std::min(cfg.batch_size, n_train - start);
      const std::span<const Index> batch(order.data() + start, std::size_t(count));
      const auto vg = value_and_grad(params, [&](Tape& tape) { return batch_loss(tape, batch); });
      if (!std::isfinite(vg.value)) {
        throw TrainingDiverged("training loss became non-finite at epoch " + std::to_string(epoch), h);
      }
      try {
        adamw_step(params, opt);
      } catch (const NonFiniteGradient& e) {
        throw TrainingDiverged(std::string(e.what()) + " at epoch " + std::to_string(epoch), h);
      }
      total += vg.value * double(count);
    }
    const double val = validation();
    if (!std::isfinite(val)) {
      throw TrainingDiverged("validation loss became non-finite at epoch " + std::to_string(epoch), h);
    }
    h.train_loss.push_back(total / double(n_train));
    h.val_loss.push_back(val);
    h.lr.push_back(opt.lr);
    if (val < h.best_val) {
      h.best_val = val;
      h.best_epoch = epoch;
      snapshot();
    }
    opt.lr = scheduler_step(sched, opt.lr, val);
    if (sched.early_stop) {
      h.early_stopped = true;
      break;
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i].tensor->values = best[i];
  return h;
}

}  // namespace dodrom::train
