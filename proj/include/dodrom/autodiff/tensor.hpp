#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dodrom {

using Index = Eigen::Index;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Raised when operand shapes do not chain. The message names the primitive.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense 64-bit tensor of rank <= 2 with an optional gradient buffer of the same shape.
///
/// Rank-1 data (biases) is stored as a single row.
struct Tensor {
  Matrix values;
  std::optional<Matrix> grad;

  Tensor() = default;
  explicit Tensor(Matrix v) : values(std::move(v)) {}
  Tensor(Index rows, Index cols) : values(Matrix::Zero(rows, cols)) {}

  [[nodiscard]] std::vector<Index> shape() const { return {values.rows(), values.cols()}; }
  [[nodiscard]] Index size() const { return values.size(); }

  Matrix& ensure_grad() {
    if (!grad || grad->rows() != values.rows() || grad->cols() != values.cols()) {
      grad = Matrix::Zero(values.rows(), values.cols());
    }
    return *grad;
  }
  void zero_grad() {
    if (grad) grad->setZero();
  }
};

/// A trainable tensor together with its sparsity mask. Masked-out entries hold exactly zero.
struct ParamRef {
  Tensor* tensor = nullptr;
  const BoolMatrix* mask = nullptr;
};

}  // namespace dodrom
