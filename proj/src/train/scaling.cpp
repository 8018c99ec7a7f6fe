#include "dodrom/train/scaling.hpp"

#include "dodrom/io/binary.hpp"
#include "dodrom/io/matrix_store.hpp"

#include <fstream>

namespace dodrom::train {

MinMax MinMax::fit(const Matrix& rows) {
  if (rows.rows() == 0) throw ShapeError("MinMax::fit: empty data");
  return {rows.colwise().minCoeff(), rows.colwise().maxCoeff()};
}

MinMax MinMax::identity(Index features) {
  return {Eigen::RowVectorXd::Zero(features), Eigen::RowVectorXd::Ones(features)};
}

Matrix MinMax::transform(const Matrix& x) const {
  if (x.cols() != features()) throw ShapeError("MinMax::transform: feature count mismatch");
  Matrix y(x.rows(), x.cols());
  for (Index c = 0; c < x.cols(); ++c) {
    const double w = hi[c] - lo[c];
    if (w > 0.0) {
      y.col(c) = (x.col(c).array() - lo[c]) / w;
    } else {
      y.col(c).setZero();
    }
  }
  return y;
}

Matrix MinMax::inverse(const Matrix& y) const {
  if (y.cols() != features()) throw ShapeError("MinMax::inverse: feature count mismatch");
  Matrix x(y.rows(), y.cols());
  for (Index c = 0; c < y.cols(); ++c) {
    const double w = hi[c] - lo[c];
    x.col(c) = (y.col(c).array() * (w > 0.0 ? w : 0.0) + lo[c]).matrix();
  }
  return x;
}

ScalarRange ScalarRange::fit(const Matrix& values) {
  if (values.size() == 0) throw ShapeError("ScalarRange::fit: empty data");
  return {values.minCoeff(), values.maxCoeff()};
}

Matrix ScalarRange::transform(const Matrix& x) const {
  const double w = span();
  if (w == 0.0) return Matrix::Zero(x.rows(), x.cols());
  return ((x.array() - lo) / w).matrix();
}

Matrix ScalarRange::inverse(const Matrix& y) const { return (y.array() * span() + lo).matrix(); }

void save_scaling(const std::string& path, const MinMax& features, const std::vector<std::string>& names,
                  const ScalarRange* solution) {
  if (Index(names.size()) != features.features()) throw ShapeError("save_scaling: one name per feature");
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "name,lo,hi\n";
  for (Index c = 0; c < features.features(); ++c) {
    os << names[std::size_t(c)] << ',' << io::format_double(features.lo[c]) << ','
       << io::format_double(features.hi[c]) << '\n';
  }
  if (solution) os << "solution," << io::format_double(solution->lo) << ',' << io::format_double(solution->hi) << '\n';
}

MinMax load_feature_scaling(const std::string& path, ScalarRange* solution) {
  const auto table = io::load_csv(path);
  std::vector<std::pair<double, double>> f;
  for (const auto& row : table.rows) {
    if (row.size() != 3) throw io::FormatError("scaling file row has wrong arity");
    if (row[0] == "solution") {
      if (solution) *solution = {std::stod(row[1]), std::stod(row[2])};
      continue;
    }
    f.emplace_back(std::stod(row[1]), std::stod(row[2]));
  }
  MinMax m{Eigen::RowVectorXd(Index(f.size())), Eigen::RowVectorXd(Index(f.size()))};
  for (std::size_t c = 0; c < f.size(); ++c) {
    m.lo[Index(c)] = f[c].first;
    m.hi[Index(c)] = f[c].second;
  }
  return m;
}

}  // namespace dodrom::train
