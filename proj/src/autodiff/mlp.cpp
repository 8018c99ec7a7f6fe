#include "dodrom/autodiff/mlp.hpp"

#include <cmath>
#include <string>

namespace dodrom {

Matrix leaky_relu(const Matrix& x, double slope) {
  return x.unaryExpr([slope](double v) { return v >= 0.0 ? v : slope * v; });
}

std::vector<double> leaky_relu(const std::vector<double>& x, double slope) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] >= 0.0 ? x[i] : slope * x[i];
  return out;
}

DenseLayer::DenseLayer(Index in, Index out, Activation act)
    : weight(out, in),
      bias(1, out),
      weight_mask(BoolMatrix::Constant(out, in, true)),
      bias_mask(BoolMatrix::Constant(1, out, true)),
      activation(act) {}

void DenseLayer::apply_masks() {
  weight.values = weight_mask.select(weight.values.array(), 0.0).matrix();
  bias.values = bias_mask.select(bias.values.array(), 0.0).matrix();
}

std::size_t DenseLayer::active_weights() const {
  return std::size_t(weight_mask.count() + bias_mask.count());
}

Mlp::Mlp(const std::vector<Index>& widths, double slope) {
  if (widths.size() < 2) throw ShapeError("Mlp: need at least input and output widths");
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const bool last = l + 2 == widths.size();
    layers_.emplace_back(widths[l], widths[l + 1],
                         last ? Activation::kIdentity : Activation::kLeakyRelu);
    layers_.back().slope = slope;
  }
}

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) { check_chain(); }

void Mlp::check_chain() const {
  for (std::size_t l = 1; l < layers_.size(); ++l) {
    if (layers_[l].in_dim() != layers_[l - 1].out_dim()) {
      throw ShapeError("Mlp: layer " + std::to_string(l) + " expects " +
                       std::to_string(layers_[l].in_dim()) + " inputs but layer " +
                       std::to_string(l - 1) + " emits " + std::to_string(layers_[l - 1].out_dim()));
    }
  }
}

void Mlp::init(std::mt19937_64& rng) {
  for (auto& layer : layers_) {
    const double bound = std::sqrt(6.0 / double(layer.in_dim() + layer.out_dim()));
    for (Index i = 0; i < layer.weight.values.size(); ++i) {
      layer.weight.values.data()[i] = bound * (2.0 * uniform01(rng) - 1.0);
    }
    layer.bias.values.setZero();
    layer.apply_masks();
  }
}

Index Mlp::in_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }
Index Mlp::out_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }

Matrix Mlp::forward(const Matrix& x) const {
  if (x.cols() != in_dim()) {
    throw ShapeError("Mlp::forward: input has " + std::to_string(x.cols()) + " features, net expects " +
                     std::to_string(in_dim()));
  }
  Matrix h = x;
  for (const auto& layer : layers_) {
    Matrix y = h * layer.weight.values.transpose();
    y.rowwise() += layer.bias.values.row(0);
    if (layer.activation == Activation::kLeakyRelu) y = leaky_relu(y, layer.slope);
    h = std::move(y);
  }
  return h;
}

Var Mlp::forward(Tape& tape, Var x) {
  Var h = x;
  for (auto& layer : layers_) {
    Var w = tape.parameter(layer.weight, &layer.weight_mask);
    Var b = tape.parameter(layer.bias, &layer.bias_mask);
    h = tape.add_row(tape.matmul_nt(h, w), b);
    if (layer.activation == Activation::kLeakyRelu) h = tape.leaky_relu(h, layer.slope);
  }
  return h;
}

std::vector<ParamRef> Mlp::parameters() {
  std::vector<ParamRef> out;
  out.reserve(2 * layers_.size());
  for (auto& layer : layers_) {
    out.push_back({&layer.weight, &layer.weight_mask});
    out.push_back({&layer.bias, &layer.bias_mask});
  }
  return out;
}

std::size_t Mlp::active_weights() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.active_weights();
  return n;
}

bool operator==(const Mlp& a, const Mlp& b) {
  if (a.layers_.size() != b.layers_.size()) return false;
  for (std::size_t l = 0; l < a.layers_.size(); ++l) {
    const auto& x = a.layers_[l];
    const auto& y = b.layers_[l];
    if (x.activation != y.activation || x.slope != y.slope) return false;
    if (x.weight.values.rows() != y.weight.values.rows() ||
        x.weight.values.cols() != y.weight.values.cols()) {
      return false;
    }
    if (x.weight.values != y.weight.values || x.bias.values != y.bias.values) return false;
    if ((x.weight_mask != y.weight_mask).any() || (x.bias_mask != y.bias_mask).any()) return false;
  }
  return true;
}

std::size_t count_active_weights(const Mlp& net) { return net.active_weights(); }

}  // namespace dodrom
