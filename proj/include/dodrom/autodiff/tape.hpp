#pragma once

#include "dodrom/autodiff/tensor.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace dodrom {

/// Handle to a node recorded on a Tape.
struct Var {
  std::size_t id = 0;
};

/// Reverse-mode tape over whole-matrix primitives.
///
/// Every primitive records its output value and a closure that pushes the output
/// gradient back to its operands. Parameters enter as leaves bound to a Tensor; on
/// backward their gradient is accumulated into Tensor::grad with masked entries zeroed.
/// Row-batched helpers (row_dot, row_norm, mul_col, div_col) treat each row as an
/// independent sample so that per-sample vector algebra can be traced in one pass.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var constant(double value);
  Var parameter(Tensor& tensor, const BoolMatrix* mask = nullptr);

  [[nodiscard]] const Matrix& value(Var v) const { return nodes_[v.id].value; }
  [[nodiscard]] double scalar(Var v) const;
  /// Gradient of the last backward() target with respect to v; zero if v was unreachable.
  [[nodiscard]] Matrix grad(Var v) const;
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }

  Var matmul(Var a, Var b);
  /// a * b^T
  Var matmul_nt(Var a, Var b);
  Var transpose(Var a);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  /// Elementwise product.
  Var mul(Var a, Var b);
  /// x + broadcast of a 1 x c row over every row of x.
  Var add_row(Var x, Var row);
  Var scale(Var a, double s);
  Var leaky_relu(Var a, double slope);
  Var sum(Var a);
  Var mean(Var a);
  Var sum_squares(Var a);
  Var reshape(Var a, Index rows, Index cols);
  Var slice_cols(Var a, Index start, Index count);
  Var concat_cols(std::span<const Var> parts);

  /// Per-row inner product of two B x c operands, giving B x 1.
  Var row_dot(Var a, Var b);
  /// Per-row Euclidean norm, B x 1.
  Var row_norm(Var a);
  /// Scales row i of x (B x c) by s(i) where s is B x 1.
  Var mul_col(Var x, Var s);
  /// Divides row i of x (B x c) by s(i) where s is B x 1.
  Var div_col(Var x, Var s);

  /// Runs the reverse sweep from a 1 x 1 node.
  void backward(Var loss);

 private:
  using Backward = std::function<void(Tape&, const Matrix&)>;

  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    Tensor* param = nullptr;
    const BoolMatrix* mask = nullptr;
  };

  Var push(Matrix value, Backward backward);
  void accumulate(Var v, const Matrix& g);

  std::vector<Node> nodes_;
};

/// Loss value and the gradient of every listed parameter, aligned with the input list.
struct ValueAndGrad {
  double value = 0.0;
  std::vector<Matrix> grads;
};

/// Evaluates a scalar loss recorded by `build` and returns its gradient with respect to
/// `params`. `build` receives a fresh tape and must return a 1 x 1 node; it registers
/// parameters itself (typically through Mlp::forward). Masked entries receive zero gradient.
template <class Build>
ValueAndGrad value_and_grad(std::span<const ParamRef> params, Build&& build) {
  for (const auto& p : params) p.tensor->ensure_grad().setZero();
  Tape tape;
  Var loss = build(tape);
  tape.backward(loss);
  ValueAndGrad out;
  out.value = tape.scalar(loss);
  out.grads.reserve(params.size());
  for (const auto& p : params) out.grads.push_back(*p.tensor->grad);
  return out;
}

}  // namespace dodrom
