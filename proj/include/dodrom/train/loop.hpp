#pragma once

#include "dodrom/autodiff/optim.hpp"
#include "dodrom/autodiff/tape.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace dodrom::train {

struct TrainConfig {
  double lr = 1e-3;
  double weight_decay = 1e-4;
  Index batch_size = 32;
  int max_epochs = 500;
  PlateauConfig plateau;
  double alpha = 0.9;    // training fraction
  double omega_h = 0.5;  // reconstruction weight of the DL-ROM losses
  std::uint64_t init_seed = 1;
  std::uint64_t shuffle_seed = 2;
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> lr;
  int best_epoch = -1;
  double best_val = std::numeric_limits<double>::infinity();
  bool early_stopped = false;
  std::size_t degenerate_events = 0;

  [[nodiscard]] int epochs() const { return int(train_loss.size()); }
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, TrainHistory h)
      : std::runtime_error(what), history(std::move(h)) {}
  TrainHistory history;
};

/// Fisher-Yates on 0..n-1 driven directly by the engine output.
std::vector<Index> permutation(Index n, std::mt19937_64& rng);

struct Split {
  std::vector<Index> train;
  std::vector<Index> validation;
};
/// Shuffles 0..n-1 and keeps round(alpha n) for training, leaving at least one element in each
/// part when n >= 2. Both parts are returned sorted.
Split split_units(Index n, double alpha, std::uint64_t seed);

/// Records the mean loss of a mini-batch (indices into the training units) on the tape.
using BatchLoss = std::function<Var(Tape&, std::span<const Index>)>;
/// Loss on the validation units, evaluated with the current weights.
using Validation = std::function<double()>;

/// Mini-batch AdamW with a plateau scheduler on the validation loss. Stops at max_epochs or
/// when the scheduler flags a plateau at the minimal rate; restores the weights of the best
/// validation epoch. Non-finite losses or gradients raise TrainingDiverged.
TrainHistory run_training(std::span<const ParamRef> params, Index n_train, const TrainConfig& cfg,
                          const BatchLoss& batch_loss, const Validation& validation);

}  // namespace dodrom::train
