#pragma once

#include "dodrom/autodiff/tensor.hpp"

#include <string>

namespace dodrom::train {

/// Per-feature min-max map x -> (x - lo) / (hi - lo) on the columns of a row batch.
/// Features with hi == lo map to 0 and invert to lo.
struct MinMax {
  Eigen::RowVectorXd lo;
  Eigen::RowVectorXd hi;

  static MinMax fit(const Matrix& rows);
  static MinMax identity(Index features);

  [[nodiscard]] Index features() const { return lo.size(); }
  [[nodiscard]] Matrix transform(const Matrix& x) const;
  [[nodiscard]] Matrix inverse(const Matrix& y) const;

  friend bool operator==(const MinMax&, const MinMax&) = default;
};

/// One range shared by every entry (used for reduced solution values).
struct ScalarRange {
  double lo = 0.0;
  double hi = 1.0;

  static ScalarRange fit(const Matrix& values);
  [[nodiscard]] double span() const { return hi > lo ? hi - lo : 0.0; }
  [[nodiscard]] Matrix transform(const Matrix& x) const;
  [[nodiscard]] Matrix inverse(const Matrix& y) const;

  friend bool operator==(const ScalarRange&, const ScalarRange&) = default;
};

/// CSV with columns name, lo, hi. `names` label the MinMax features; the scalar range, when
/// present, is written last under the name "solution".
void save_scaling(const std::string& path, const MinMax& features, const std::vector<std::string>& names,
                  const ScalarRange* solution = nullptr);
MinMax load_feature_scaling(const std::string& path, ScalarRange* solution = nullptr);

}  // namespace dodrom::train
