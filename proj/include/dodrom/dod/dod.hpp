#pragma once

#include "dodrom/autodiff/mlp.hpp"
#include "dodrom/fom/snapshots.hpp"
#include "dodrom/train/loop.hpp"
#include "dodrom/train/scaling.hpp"

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dodrom::dod {

class DegenerateBasis : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kDegenerateNorm = 1e-10;

struct DodDims {
  Index p = 2;        // geometric parameters
  Index ell = 8;      // seed width
  Index n_a = 10;     // pre-reduction dimension
  Index n_prime = 2;  // adaptive basis size
  std::vector<Index> seed_hidden{32, 32};
  std::vector<Index> head_hidden{32};

  void validate() const;
};

/// Degenerate columns either throw (strict) or are replaced by the first canonical direction
/// that survives orthogonalization against the earlier columns; `counter` tallies those rows.
struct OrthOptions {
  bool strict = true;
  std::size_t* counter = nullptr;
};

/// Modified Gram-Schmidt applied row-wise: w[i] holds column i of B stacked matrices
/// (B x N_A). Returns columns of the same layout, orthonormal per row, each with its leading
/// nonzero entry positive.
std::vector<Matrix> orthonormalize(const std::vector<Matrix>& w, const OrthOptions& opt = {});
std::vector<Var> orthonormalize(Tape& tape, std::span<const Var> w, const OrthOptions& opt = {});

class DodModel {
 public:
  DodModel() = default;
  /// `basis` is the G-orthonormal pre-reduction matrix (N_h x N_A).
  DodModel(DodDims dims, Eigen::MatrixXd basis);

  void init(std::uint64_t seed);

  [[nodiscard]] const DodDims& dims() const { return dims_; }
  [[nodiscard]] const Eigen::MatrixXd& basis() const { return basis_; }
  [[nodiscard]] const Mlp& seed_net() const { return seed_; }
  [[nodiscard]] const std::vector<Mlp>& heads() const { return heads_; }
  [[nodiscard]] std::vector<Mlp>& heads() { return heads_; }
  [[nodiscard]] Mlp& seed_net() { return seed_; }

  /// Min-max map of the raw inputs (mu_1..mu_p, t).
  train::MinMax inputs;

  [[nodiscard]] std::vector<ParamRef> parameters();
  [[nodiscard]] std::size_t active_weights() const;

  /// Columns of V~ for a batch of raw inputs (B x (p + 1)); entry i is B x N_A.
  [[nodiscard]] std::vector<Matrix> inner_columns(const Matrix& raw, const OrthOptions& opt = {}) const;
  /// Same map recorded on a tape from already normalized inputs.
  std::vector<Var> inner_columns(Tape& tape, Var normalized, const OrthOptions& opt = {});

  /// V~ (N_A x N') at one (mu, t).
  [[nodiscard]] Eigen::MatrixXd inner(const Vector& mu, double t) const;
  /// V = A V~ (N_h x N').
  [[nodiscard]] Eigen::MatrixXd full_basis(const Vector& mu, double t) const;

  friend bool operator==(const DodModel& a, const DodModel& b);

 private:
  DodDims dims_;
  Eigen::MatrixXd basis_;
  Mlp seed_;
  std::vector<Mlp> heads_;
};

/// Pre-reduced training slices: one row per (geometry, time) with all physical samples.
struct SliceData {
  Matrix inputs;                // S x (p + 1), raw (mu_1, mu_2, t)
  std::vector<Matrix> columns;  // N_s2 entries, S x N_A: row s is the pre-reduced snapshot
  std::vector<Index> geom;      // geometry index of each row
  std::vector<Index> time;      // time index of each row

  [[nodiscard]] Index rows() const { return inputs.rows(); }
  [[nodiscard]] Index n_phys() const { return Index(columns.size()); }
};

/// Builds slices from a tensor-product snapshot set and its pre-reduction A^T G U.
SliceData make_slices(const fom::SnapshotSet& set, const Eigen::MatrixXd& pre);

/// Rows of the raw input matrix (mu_1, mu_2, t) for a geometry over all output times.
Matrix trajectory_inputs(const fom::GeomParams& mu, const std::vector<double>& times);

/// Mean over the selected rows and all physical samples of |s - V~ V~^T s|^2.
Var dod_loss(Tape& tape, DodModel& model, const SliceData& data, std::span<const Index> rows,
             const OrthOptions& opt = {});
double dod_loss(const DodModel& model, const SliceData& data, std::span<const Index> rows);
/// Per-row loss (1/N_s2) sum_j |s_j - V~ V~^T s_j|^2.
Vector slice_losses(const DodModel& model, const SliceData& data);

struct DodTraining {
  train::TrainHistory history;
  train::Split split;  // over geometry indices
};

/// Fits the input scaling on the training geometries, initialises the networks from
/// cfg.init_seed and minimises dod_loss. Degenerate columns use the fallback during training.
DodTraining train_dod(DodModel& model, const SliceData& data, Index n_geom, const train::TrainConfig& cfg);

/// Pre-reduction of a tensor-product set to dims.n_a POD modes (weight 1/N_data), slicing and
/// training in one call.
struct FittedDod {
  DodModel model;
  DodTraining training;
};
FittedDod fit_dod(const fom::SnapshotSet& set, const DodDims& dims, const train::TrainConfig& cfg);
/// Same with a given G-orthonormal pre-reduction basis (N_h x dims.n_a).
FittedDod fit_dod(const fom::SnapshotSet& set, const Eigen::MatrixXd& basis, const DodDims& dims,
                  const train::TrainConfig& cfg);

/// Directory bundle: dod.ini (dims), seed.net, head_<i>.net, basis.bin, inputs.csv.
void save_dod(const std::string& dir, const DodModel& model);
DodModel load_dod(const std::string& dir);

}  // namespace dodrom::dod
