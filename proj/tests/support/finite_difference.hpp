#pragma once

// Central finite-difference gradient oracle. Only evaluates the loss forward; never
// touches the reverse sweep it is used to check.

#include "dodrom/autodiff/tape.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace dodrom::testing {

using LossFn = std::function<double()>;

/// d loss / d theta for every unmasked entry of every parameter; masked entries get 0.
inline std::vector<Matrix> central_difference(std::span<const ParamRef> params, const LossFn& loss,
                                              double step = 1e-6) {
  std::vector<Matrix> out;
  for (const auto& p : params) {
    Matrix g = Matrix::Zero(p.tensor->values.rows(), p.tensor->values.cols());
    for (Index k = 0; k < g.size(); ++k) {
      if (p.mask && !p.mask->data()[k]) continue;
      double& theta = p.tensor->values.data()[k];
      const double saved = theta;
      theta = saved + step;
      const double up = loss();
      theta = saved - step;
      const double down = loss();
      theta = saved;
      g.data()[k] = (up - down) / (2.0 * step);
    }
    out.push_back(std::move(g));
  }
  return out;
}

/// ||a - b|| / max(||b||, floor) over the concatenation of all blocks.
inline double relative_gap(const std::vector<Matrix>& a, const std::vector<Matrix>& b,
                           double floor = 1e-12) {
  double diff = 0.0;
  double ref = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]).squaredNorm();
    ref += b[i].squaredNorm();
  }
  return std::sqrt(diff) / std::max(std::sqrt(ref), floor);
}

/// Same oracle for the gradient with respect to an input matrix.
inline Matrix central_difference_input(Matrix& x, const LossFn& loss, double step = 1e-6) {
  Matrix g = Matrix::Zero(x.rows(), x.cols());
  for (Index k = 0; k < x.size(); ++k) {
    const double saved = x.data()[k];
    x.data()[k] = saved + step;
    const double up = loss();
    x.data()[k] = saved - step;
    const double down = loss();
    x.data()[k] = saved;
    g.data()[k] = (up - down) / (2.0 * step);
  }
  return g;
}

}  // namespace dodrom::testing
