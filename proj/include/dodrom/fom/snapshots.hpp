#pragma once

#include "dodrom/fom/transport.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace dodrom::fom {

struct BenchmarkConfig {
  Index nx = 60;
  Index ny = 60;
  double final_time = 1.2;
  Index n_t = 60;
  Index n_geom = 5;  // N_s1
  Index n_phys = 5;  // N_s2
  ParameterRanges ranges;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

/// One simulated trajectory: indices into the geometric and physical parameter lists.
struct TrajectoryRef {
  Index geom = 0;
  Index phys = 0;
  friend bool operator==(const TrajectoryRef&, const TrajectoryRef&) = default;
};

/// Stacked FOM trajectories. Column (trajectory r, time k) is r * n_t + k. For a tensor-product
/// sample the trajectories run over the geometric index fastest, then the physical index,
/// matching U = [u^{mu_1, nu_1} | ... | u^{mu_Ns1, nu_1} | ... | u^{mu_Ns1, nu_Ns2}].
struct SnapshotSet {
  Grid grid{2, 2};
  Eigen::MatrixXd U;  // N_h x N_data, column-major
  std::vector<GeomParams> geom;
  std::vector<PhysParams> phys;
  std::vector<double> times;  // dt, 2 dt, ..., n_t dt
  std::vector<TrajectoryRef> trajectories;
  // Descriptor fields carried to the store.
  double final_time = 0.0;
  ParameterRanges ranges;
  std::uint64_t seed = 0;

  [[nodiscard]] Index n_t() const { return Index(times.size()); }
  [[nodiscard]] Index n_traj() const { return Index(trajectories.size()); }
  [[nodiscard]] Index n_data() const { return U.cols(); }
  [[nodiscard]] Index n_h() const { return U.rows(); }
  [[nodiscard]] Index column(Index traj, Index k) const { return traj * n_t() + k; }
  [[nodiscard]] Vector mass() const { return grid.mass(); }
  /// True when trajectories are the full grid geom x phys in canonical order.
  [[nodiscard]] bool is_tensor_product() const;

  /// Columns of trajectory r as a block.
  [[nodiscard]] auto trajectory(Index r) const { return U.middleCols(r * n_t(), n_t()); }

  void check() const;
};

/// Uniform time grid {dt, ..., n_t dt} with dt = T / n_t.
std::vector<double> time_grid(double final_time, Index n_t);

/// Draws geometric then physical parameters i.i.d. uniform from their boxes.
std::vector<GeomParams> sample_geom(std::mt19937_64& rng, Index n, const ParameterRanges& ranges);
std::vector<PhysParams> sample_phys(std::mt19937_64& rng, Index n, const ParameterRanges& ranges);

/// Tensor-product training corpus: one Darcy solve per geometry, one transport solve per
/// (geometry, physics) pair.
SnapshotSet generate_snapshots(const BenchmarkConfig& cfg);

/// `count` independent (mu, nu) pairs drawn with `seed`, one trajectory each.
SnapshotSet generate_test_set(const BenchmarkConfig& cfg, Index count, std::uint64_t seed);

/// Full-order trajectory for one parameter tuple.
Eigen::MatrixXd solve_fom(const Grid& grid, const GeomParams& mu, const PhysParams& nu,
                          double final_time, Index n_t, const ParameterRanges& ranges = {});

/// Snapshot store: `<base>.bin` (matrix), `<base>.csv` (col_index, mu1, mu2, nu1, nu2, t)
/// and `<base>.ini` (grid and sampling descriptor).
void save_snapshots(const std::string& base, const SnapshotSet& set);
SnapshotSet load_snapshots(const std::string& base);

/// FNV-1a over the binary matrix file of a store.
std::uint64_t snapshot_fingerprint(const std::string& base);

}  // namespace dodrom::fom
