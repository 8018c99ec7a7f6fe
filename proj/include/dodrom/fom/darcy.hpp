#pragma once

#include "dodrom/fom/grid.hpp"

#include <stdexcept>

namespace dodrom::fom {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two-point-flux Darcy solution. Face fluxes are integrated over the face (velocity times
/// face length) and signed along +x1 / +x2.
struct FlowField {
  Index nx = 0;
  Index ny = 0;
  Vector pressure;      // per cell
  Vector flux_x;        // (nx + 1) * ny, face (i, j) lies left of cell (i, j)
  Vector flux_y;        // nx * (ny + 1), face (i, j) lies below cell (i, j)
  Eigen::MatrixX2d velocity;  // per cell, averaged from the face fluxes
  int iterations = 0;
  double residual = 0.0;

  [[nodiscard]] double& fx(Index i, Index j) { return flux_x[j * (nx + 1) + i]; }
  [[nodiscard]] double fx(Index i, Index j) const { return flux_x[j * (nx + 1) + i]; }
  [[nodiscard]] double& fy(Index i, Index j) { return flux_y[j * nx + i]; }
  [[nodiscard]] double fy(Index i, Index j) const { return flux_y[j * nx + i]; }

  /// Net outward flux of every cell.
  [[nodiscard]] Vector divergence() const;
  /// Sum of boundary fluxes entering through the inlet (positive).
  [[nodiscard]] double inflow(const Grid& grid) const;
  /// Sum of boundary fluxes leaving through the outlet (positive).
  [[nodiscard]] double outflow(const Grid& grid) const;

  /// All-zero field on the grid, for tests and pure-reaction runs.
  static FlowField zero(const Grid& grid);
};

struct DarcyOptions {
  double tolerance = 1e-12;
  Index max_iterations = 0;  // 0 selects 20 * cells
  /// Replaces the filter permeability with 1 everywhere.
  bool disable_filter = false;
};

/// Solves -div(k grad p) = 0 with p = 0 on the outlet, prescribed normal inflow j . n on the
/// inlet (midpoint rule per face) and no flux through walls. Interface permeabilities are
/// harmonic means. Conjugate gradients with diagonal preconditioning.
FlowField solve_darcy(const Grid& grid, const GeomParams& mu, const ParameterRanges& ranges = {},
                      const DarcyOptions& options = {});

}  // namespace dodrom::fom
