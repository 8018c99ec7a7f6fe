#pragma once

#include "dodrom/autodiff/tensor.hpp"

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace dodrom {

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;
};

struct OptimizerState {
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::int64_t step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;

  OptimizerState() = default;
  OptimizerState(std::span<const ParamRef> params, const AdamWConfig& cfg);
};

/// One AdamW update using the gradients stored in each Tensor::grad.
///
/// Weight decay is decoupled (theta -= lr * wd * theta before the adaptive step) and
/// moments are bias-corrected. Masked entries are never touched. If any gradient entry
/// is non-finite the parameters and state are left unchanged and NonFiniteGradient is thrown.
void adamw_step(std::span<const ParamRef> params, OptimizerState& state);

struct PlateauConfig {
  double factor = 0.5;
  int patience = 10;
  double threshold = 1e-4;
  double min_lr = 1e-6;
};

/// ReduceLROnPlateau in relative-threshold mode.
struct SchedulerState {
  double best = std::numeric_limits<double>::infinity();
  int bad_epochs = 0;
  int patience = 10;
  double factor = 0.5;
  double threshold = 1e-4;
  double min_lr = 1e-6;
  bool early_stop = false;

  SchedulerState() = default;
  explicit SchedulerState(const PlateauConfig& cfg)
      : patience(cfg.patience), factor(cfg.factor), threshold(cfg.threshold), min_lr(cfg.min_lr) {}
};

/// Feeds one validation loss and returns the learning rate to use next.
///
/// A loss counts as an improvement if it is below best * (1 - threshold). After more than
/// `patience` consecutive non-improving epochs the rate is multiplied by `factor` (floored at
/// min_lr) and the counter restarts; if the rate was already at min_lr, early_stop is raised.
double scheduler_step(SchedulerState& state, double lr, double val_loss);

}  // namespace dodrom
