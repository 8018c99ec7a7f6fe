#pragma once

#include "dodrom/autodiff/tape.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace dodrom {

inline constexpr double kDefaultLeakySlope = 0.1;

enum class Activation : std::uint8_t { kIdentity = 0, kLeakyRelu = 1 };

/// Elementwise x if x >= 0 else slope * x.
Matrix leaky_relu(const Matrix& x, double slope = kDefaultLeakySlope);
std::vector<double> leaky_relu(const std::vector<double>& x, double slope = kDefaultLeakySlope);

/// Affine layer y = x W^T + b applied to row-batched input, followed by an activation.
struct DenseLayer {
  Tensor weight;  // out x in
  Tensor bias;    // 1 x out
  BoolMatrix weight_mask;
  BoolMatrix bias_mask;
  Activation activation = Activation::kLeakyRelu;
  double slope = kDefaultLeakySlope;

  DenseLayer() = default;
  DenseLayer(Index in, Index out, Activation act);

  [[nodiscard]] Index in_dim() const { return weight.values.cols(); }
  [[nodiscard]] Index out_dim() const { return weight.values.rows(); }

  /// Zeroes every masked-out entry; call after changing masks or loading values.
  void apply_masks();
  [[nodiscard]] std::size_t active_weights() const;
};

/// Plain feed-forward stack. Hidden layers use leaky-ReLU, the last layer is affine.
class Mlp {
 public:
  Mlp() = default;
  /// widths = {in, hidden..., out}
  explicit Mlp(const std::vector<Index>& widths, double slope = kDefaultLeakySlope);
  explicit Mlp(std::vector<DenseLayer> layers);

  /// Uniform Glorot initialisation with zero biases.
  void init(std::mt19937_64& rng);

  [[nodiscard]] Index in_dim() const;
  [[nodiscard]] Index out_dim() const;
  [[nodiscard]] const std::vector<DenseLayer>& layers() const { return layers_; }
  [[nodiscard]] std::vector<DenseLayer>& layers() { return layers_; }

  /// Realisation on a B x in batch, without recording.
  [[nodiscard]] Matrix forward(const Matrix& x) const;
  /// Same map recorded on a tape, with every weight and bias registered as a parameter.
  Var forward(Tape& tape, Var x);

  [[nodiscard]] std::vector<ParamRef> parameters();
  [[nodiscard]] std::size_t active_weights() const;

  friend bool operator==(const Mlp& a, const Mlp& b);

 private:
  void check_chain() const;
  std::vector<DenseLayer> layers_;
};

/// Number of unmasked weight and bias entries.
std::size_t count_active_weights(const Mlp& net);

/// Draws a double in [0, 1) from the top 53 bits of the generator, independent of the
/// standard library's distribution implementation.
inline double uniform01(std::mt19937_64& rng) {
  return double(rng() >> 11) * 0x1.0p-53;
}

}  // namespace dodrom
