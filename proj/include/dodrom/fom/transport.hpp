#pragma once

#include "dodrom/fom/darcy.hpp"

namespace dodrom::fom {

struct TransportOptions {
  double cfl = 0.9;
  Index max_substeps = 1'000'000;
  /// Multiplies the inlet profile; 0 switches the feed off.
  double inlet_amplitude = 1.0;
};

/// Explicit first-order upwind advection with a reaction sink on the filter regions.
///
/// Starts from zero with inlet cells (first column inside the inlet band) set to the inlet
/// profile, which is also the inflow boundary value. Inlet cells are overwritten after every
/// substep. Each output interval T / n_t is split into equal substeps so that
/// dt * (outflow / area + reaction) <= cfl in every cell. Returns one column per output time
/// k T / n_t, k = 1..n_t.
Eigen::MatrixXd solve_transport(const Grid& grid, const FlowField& flow, const GeomParams& mu,
                                const PhysParams& nu, double final_time, Index n_t,
                                const TransportOptions& options = {});

/// Substeps per output interval that the CFL bound requires.
Index transport_substeps(const Grid& grid, const FlowField& flow, const GeomParams& mu,
                         const PhysParams& nu, double output_dt, double cfl = 0.9);

}  // namespace dodrom::fom
