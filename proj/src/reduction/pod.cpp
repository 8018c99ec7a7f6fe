#include "dodrom/reduction/pod.hpp"

#include "dodrom/io/binary.hpp"
#include "dodrom/io/matrix_store.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace dodrom::reduction {

SymmetricEigen symmetric_eigen(const Eigen::MatrixXd& c) {
  if (c.rows() != c.cols()) throw ShapeError("symmetric_eigen: matrix is not square");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(c);
  if (solver.info() != Eigen::Success) throw std::runtime_error("symmetric_eigen: no convergence");
  const Index n = c.rows();
  SymmetricEigen out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  for (Index k = 0; k < n; ++k) {
    for (Index i = 0; i < n; ++i) {
      const double v = out.vectors(i, k);
      if (std::abs(v) > 1e-12) {
        if (v < 0.0) out.vectors.col(k) *= -1.0;
        break;
      }
    }
  }
  return out;
}

namespace {

void check_mass(const Eigen::MatrixXd& u, const Vector& g) {
  if (u.rows() != g.size()) throw ShapeError("mass diagonal does not match snapshot rows");
  if (g.minCoeff() <= 0.0) throw ShapeError("mass diagonal must be positive");
}

}  // namespace

PodBasis pod(const Eigen::MatrixXd& u, const Vector& g, Index n, double weight) {
  check_mass(u, g);
  if (!(weight > 0.0)) throw std::invalid_argument("pod: weight must be positive");
  if (n < 0 || n > u.cols()) throw RankError("pod: requested more modes than snapshots");
  const Eigen::MatrixXd scaled = g.cwiseSqrt().asDiagonal() * u;
  Eigen::MatrixXd c = weight * (scaled.transpose() * scaled);
  const SymmetricEigen eig = symmetric_eigen(c);

  PodBasis basis;
  basis.weight = weight;
  basis.eigenvalues = eig.values.cwiseMax(0.0);
  if (n > 0) {
    const double top = basis.eigenvalues[0];
    if (!(basis.eigenvalues[n - 1] >= 1e-14 * top) || top <= 0.0) {
      throw RankError("pod: " + std::to_string(n) + " modes exceed the numerical rank");
    }
  }
  basis.modes.resize(u.rows(), n);
  for (Index k = 0; k < n; ++k) {
    basis.modes.col(k) = std::sqrt(weight) * (u * eig.vectors.col(k)) / std::sqrt(basis.eigenvalues[k]);
  }
  return basis;
}

double projection_error(const Eigen::MatrixXd& u, const Eigen::MatrixXd& modes, const Vector& g,
                        double weight) {
  check_mass(u, g);
  if (modes.rows() != u.rows()) throw ShapeError("projection_error: basis rows differ from snapshots");
  Eigen::MatrixXd r = u;
  if (modes.cols() > 0) r -= modes * pre_reduce(u, modes, g);
  return weight * (r.array().square().colwise() * g.array()).sum();
}

double eigen_tail(const Vector& eigenvalues, Index n) {
  if (n >= eigenvalues.size()) return 0.0;
  return eigenvalues.tail(eigenvalues.size() - n).sum();
}

Eigen::MatrixXd pre_reduce(const Eigen::MatrixXd& u, const Eigen::MatrixXd& modes, const Vector& g) {
  check_mass(u, g);
  if (modes.rows() != u.rows()) throw ShapeError("pre_reduce: basis rows differ from snapshots");
  return modes.transpose() * (g.asDiagonal() * u);
}

double orthonormality_defect(const Eigen::MatrixXd& modes, const Vector& g) {
  const Eigen::MatrixXd m = modes.transpose() * g.asDiagonal() * modes;
  return (m - Eigen::MatrixXd::Identity(m.rows(), m.cols())).cwiseAbs().maxCoeff();
}

std::vector<Index> slice_columns(const fom::SnapshotSet& set, Index i, Index k) {
  if (!set.is_tensor_product()) throw std::invalid_argument("slices need a tensor-product snapshot set");
  std::vector<Index> cols;
  const Index n_geom = Index(set.geom.size());
  for (Index j = 0; j < Index(set.phys.size()); ++j) cols.push_back(set.column(j * n_geom + i, k));
  return cols;
}

SlicedSpectrum sliced_spectra(const fom::SnapshotSet& set, const Eigen::MatrixXd& pre, double weight) {
  if (pre.cols() != set.n_data()) throw ShapeError("sliced_spectra: pre-reduced data has wrong width");
  SlicedSpectrum out;
  out.n_geom = Index(set.geom.size());
  out.n_t = set.n_t();
  out.weight = weight > 0.0 ? weight : 1.0 / double(set.phys.size());
  out.values.resize(std::size_t(out.n_geom * out.n_t));
  for (Index i = 0; i < out.n_geom; ++i) {
    for (Index k = 0; k < out.n_t; ++k) {
      const auto cols = slice_columns(set, i, k);
      Eigen::MatrixXd s(pre.rows(), Index(cols.size()));
      for (std::size_t c = 0; c < cols.size(); ++c) s.col(Index(c)) = pre.col(cols[c]);
      const Eigen::MatrixXd gram = out.weight * (s.transpose() * s);
      out.values[std::size_t(i * out.n_t + k)] = symmetric_eigen(gram).values.cwiseMax(0.0);
    }
  }
  return out;
}

namespace {

double relative_tail(const Vector& s, Index n) {
  const double total = s.sum();
  if (total <= 0.0) return 0.0;
  return std::sqrt(std::max(0.0, eigen_tail(s, n)) / total);
}

}  // namespace

std::vector<KnwRow> knw_curves(const Vector& global, const SlicedSpectrum& slices, Index n_max) {
  Index min_rank = global.size();
  for (const auto& v : slices.values) min_rank = std::min(min_rank, v.size());
  if (n_max < 1 || n_max > min_rank) {
    throw std::invalid_argument("knw_curves: n_max must lie in [1, " + std::to_string(min_rank) + "]");
  }
  std::vector<KnwRow> rows;
  for (Index n = 1; n <= n_max; ++n) {
    KnwRow row;
    row.n = n;
    row.global_tail = relative_tail(global, n);
    for (const auto& v : slices.values) row.worst_slice_tail = std::max(row.worst_slice_tail, relative_tail(v, n));
    rows.push_back(row);
  }
  return rows;
}

std::vector<KnwRow> knw_curves(const fom::SnapshotSet& set, Index n_a, Index n_max) {
  const Vector g = set.mass();
  const PodBasis basis = pod(set.U, g, n_a, normalized_weight(set.n_data()));
  return knw_curves(basis.eigenvalues, sliced_spectra(set, pre_reduce(set.U, basis.modes, g)), n_max);
}

void save_knw_csv(const std::string& path, const std::vector<KnwRow>& rows) {
  std::vector<std::vector<double>> table;
  for (const auto& r : rows) table.push_back({double(r.n), r.global_tail, r.worst_slice_tail});
  io::save_csv(path, {"n", "global_tail", "worst_slice_tail"}, table);
}

void save_basis(const std::string& base, const PodBasis& basis) {
  io::save_matrix(base + ".bin", basis.modes);
  std::vector<std::vector<double>> rows;
  for (Index k = 0; k < basis.eigenvalues.size(); ++k) {
    rows.push_back({double(k + 1), basis.eigenvalues[k], basis.weight});
  }
  io::save_csv(base + "_eigenvalues.csv", {"k", "eigenvalue", "weight"}, rows);
}

PodBasis load_basis(const std::string& base) {
  PodBasis basis;
  basis.modes = io::load_matrix(base + ".bin");
  const auto table = io::load_csv(base + "_eigenvalues.csv");
  basis.eigenvalues.resize(Index(table.rows.size()));
  for (std::size_t k = 0; k < table.rows.size(); ++k) {
    if (table.rows[k].size() != 3) throw io::FormatError("eigenvalue file row has wrong arity");
    basis.eigenvalues[Index(k)] = std::stod(table.rows[k][1]);
    basis.weight = std::stod(table.rows[k][2]);
  }
  return basis;
}

}  // namespace dodrom::reduction
