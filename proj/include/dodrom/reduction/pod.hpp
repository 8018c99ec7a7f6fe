#pragma once

#include "dodrom/fom/snapshots.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace dodrom::reduction {

class RankError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Eigenpairs of a symmetric matrix, eigenvalues descending. Each eigenvector has its first
/// component of magnitude > 1e-12 made positive.
struct SymmetricEigen {
  Vector values;
  Eigen::MatrixXd vectors;
};
SymmetricEigen symmetric_eigen(const Eigen::MatrixXd& c);

/// G-orthonormal POD basis together with the full correlation spectrum.
struct PodBasis {
  Eigen::MatrixXd modes;  // N_h x N
  Vector eigenvalues;     // all of them, descending, clipped at 0
  double weight = 1.0;

  [[nodiscard]] Index n() const { return modes.cols(); }
  [[nodiscard]] Index n_h() const { return modes.rows(); }
};

/// Weight of the empirical measure on normalized parameter boxes: 1 / N_data.
inline double normalized_weight(Index n_data) { return 1.0 / double(n_data); }

/// Method of snapshots on C = weight * U^T G U with G = diag(g). Modes are
/// sqrt(weight) U psi_k / sigma_k so that A^T G A = I.
PodBasis pod(const Eigen::MatrixXd& u, const Vector& g, Index n, double weight);

/// weight * sum over columns of |u - A A^T G u|_G^2.
double projection_error(const Eigen::MatrixXd& u, const Eigen::MatrixXd& modes, const Vector& g,
                        double weight);

/// Sum of the eigenvalues beyond the first n.
double eigen_tail(const Vector& eigenvalues, Index n);

/// A^T G U.
Eigen::MatrixXd pre_reduce(const Eigen::MatrixXd& u, const Eigen::MatrixXd& modes, const Vector& g);

/// max |A^T G A - I|.
double orthonormality_defect(const Eigen::MatrixXd& modes, const Vector& g);

/// Per (geometry, time) slice spectra of weight * U_pre(mu, t)^T U_pre(mu, t), where the slice
/// gathers the pre-reduced columns over all physical parameters.
struct SlicedSpectrum {
  Index n_geom = 0;
  Index n_t = 0;
  double weight = 1.0;
  std::vector<Vector> values;  // index i * n_t + k

  [[nodiscard]] const Vector& at(Index i, Index k) const { return values[std::size_t(i * n_t + k)]; }
};

/// Column indices of slice (i, k) of a tensor-product set, ordered by physical index.
std::vector<Index> slice_columns(const fom::SnapshotSet& set, Index i, Index k);

/// `pre` holds the pre-reduced snapshots (N_A x N_data). weight <= 0 selects 1 / N_s2.
SlicedSpectrum sliced_spectra(const fom::SnapshotSet& set, const Eigen::MatrixXd& pre,
                              double weight = 0.0);

struct KnwRow {
  Index n = 0;
  double global_tail = 0.0;
  double worst_slice_tail = 0.0;
};

/// Relative tails sqrt(sum_{k>n} s_k / sum_k s_k) for n = 1..n_max, globally and worst over slices.
std::vector<KnwRow> knw_curves(const Vector& global, const SlicedSpectrum& slices, Index n_max);

/// Full pipeline: global POD spectrum of the set, pre-reduction to n_a modes, slice spectra.
std::vector<KnwRow> knw_curves(const fom::SnapshotSet& set, Index n_a, Index n_max);

void save_knw_csv(const std::string& path, const std::vector<KnwRow>& rows);

/// `<base>.bin` holds the modes, `<base>_eigenvalues.csv` the spectrum and weight.
void save_basis(const std::string& base, const PodBasis& basis);
PodBasis load_basis(const std::string& base);

}  // namespace dodrom::reduction
