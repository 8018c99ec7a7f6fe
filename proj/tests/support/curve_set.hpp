#pragma once

#include "support/primitive_cases.hpp"

#include "dodrom/fom/snapshots.hpp"

#include <cmath>

namespace dodrom::testing {

// Tensor-product set on a 4x4 grid whose columns follow a smooth one-parameter curve in a
// four-dimensional subspace. A nonzero basis_seed fixes the subspace independently of the
// parameter draws, so sets with different seeds share it.
inline fom::SnapshotSet curve_set(Index n_geom, Index n_phys, Index n_t, std::uint64_t seed,
                                  std::uint64_t basis_seed = 0) {
  std::mt19937_64 rng(seed);
  fom::SnapshotSet set;
  set.grid = fom::Grid(4, 4);
  fom::ParameterRanges ranges;
  set.geom = fom::sample_geom(rng, n_geom, ranges);
  set.phys = fom::sample_phys(rng, n_phys, ranges);
  set.times = fom::time_grid(1.0, n_t);
  set.final_time = 1.0;
  for (Index j = 0; j < n_phys; ++j)
    for (Index i = 0; i < n_geom; ++i) set.trajectories.push_back({i, j});
  std::mt19937_64 basis_rng(basis_seed);
  const Eigen::MatrixXd phi = random_matrix(basis_seed ? basis_rng : rng, 16, 4);
  set.U.resize(16, set.n_traj() * n_t);
  for (Index r = 0; r < set.n_traj(); ++r) {
    const auto& mu = set.geom[std::size_t(set.trajectories[std::size_t(r)].geom)];
    const auto& nu = set.phys[std::size_t(set.trajectories[std::size_t(r)].phys)];
    for (Index k = 0; k < n_t; ++k) {
      const double s = 2.0 * mu.mu1 + 0.5 * mu.mu2 + nu.nu1 + set.times[std::size_t(k)];
      Eigen::Vector4d c(std::cos(s), std::sin(s), std::cos(2 * s), 1.0);
      set.U.col(set.column(r, k)) = phi * c;
    }
  }
  return set;
}

}  // namespace dodrom::testing
