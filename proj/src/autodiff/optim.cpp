#include "dodrom/autodiff/optim.hpp"

#include <algorithm>
#include <cmath>

namespace dodrom {

OptimizerState::OptimizerState(std::span<const ParamRef> params, const AdamWConfig& cfg)
    : lr(cfg.lr), beta1(cfg.beta1), beta2(cfg.beta2), eps(cfg.eps), weight_decay(cfg.weight_decay) {
  for (const auto& p : params) {
    first_moment.push_back(Matrix::Zero(p.tensor->values.rows(), p.tensor->values.cols()));
    second_moment.push_back(Matrix::Zero(p.tensor->values.rows(), p.tensor->values.cols()));
  }
}

void adamw_step(std::span<const ParamRef> params, OptimizerState& state) {
  if (params.size() != state.first_moment.size()) {
    throw ShapeError("adamw_step: optimizer state tracks " + std::to_string(state.first_moment.size()) +
                     " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& t = *params[i].tensor;
    if (!t.grad || t.grad->rows() != t.values.rows() || t.grad->cols() != t.values.cols() ||
        state.first_moment[i].rows() != t.values.rows() ||
        state.first_moment[i].cols() != t.values.cols()) {
      throw ShapeError("adamw_step: gradient or moment shape differs for parameter " +
                       std::to_string(i));
    }
    if (!t.grad->allFinite()) {
      throw NonFiniteGradient("adamw_step: non-finite gradient in parameter " + std::to_string(i));
    }
  }

  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, double(state.step));

  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& t = *params[i].tensor;
    const BoolMatrix* mask = params[i].mask;
    Matrix& m = state.first_moment[i];
    Matrix& v = state.second_moment[i];
    const Matrix& g = *t.grad;
    for (Index k = 0; k < t.values.size(); ++k) {
      if (mask && !mask->data()[k]) continue;
      double& theta = t.values.data()[k];
      const double gk = g.data()[k];
      theta -= state.lr * state.weight_decay * theta;
      double& mk = m.data()[k];
      double& vk = v.data()[k];
      mk = state.beta1 * mk + (1.0 - state.beta1) * gk;
      vk = state.beta2 * vk + (1.0 - state.beta2) * gk * gk;
      const double mhat = mk / bc1;
      const double vhat = vk / bc2;
      theta -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

double scheduler_step(SchedulerState& state, double lr, double val_loss) {
  if (val_loss < state.best * (1.0 - state.threshold)) {
    state.best = val_loss;
    state.bad_epochs = 0;
    return lr;
  }
  state.bad_epochs += 1;
  if (state.bad_epochs > state.patience) {
    state.bad_epochs = 0;
    if (lr <= state.min_lr) {
      state.early_stop = true;
      return state.min_lr;
    }
    return std::max(lr * state.factor, state.min_lr);
  }
  return lr;
}

}  // namespace dodrom
