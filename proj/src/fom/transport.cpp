#include "dodrom/fom/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace dodrom::fom {

namespace {

Vector reaction_field(const Grid& grid, const GeomParams& mu, const PhysParams& nu) {
  Vector c(grid.cells());
  for (Index j = 0; j < grid.ny(); ++j) {
    double cj = 0.0;
    switch (region_at(grid.yc(j), mu.mu1)) {
      case Region::kCoating: cj = nu.nu1; break;
      case Region::kWashcoat: cj = nu.nu2; break;
      case Region::kFree: break;
    }
    for (Index i = 0; i < grid.nx(); ++i) c[grid.cell(i, j)] = cj;
  }
  return c;
}

// Largest per-cell rate (outflow / area + reaction).
double max_rate(const Grid& grid, const FlowField& flow, const Vector& reaction) {
  const double area = grid.cell_area();
  double rate = 0.0;
  for (Index j = 0; j < grid.ny(); ++j) {
    for (Index i = 0; i < grid.nx(); ++i) {
      const double out = std::max(flow.fx(i + 1, j), 0.0) + std::max(-flow.fx(i, j), 0.0) +
                         std::max(flow.fy(i, j + 1), 0.0) + std::max(-flow.fy(i, j), 0.0);
      rate = std::max(rate, out / area + reaction[grid.cell(i, j)]);
    }
  }
  return rate;
}

void check_flow(const Grid& grid, const FlowField& flow) {
  if (flow.nx != grid.nx() || flow.ny != grid.ny()) {
    throw ParameterError("flow field was computed on a different grid");
  }
}

}  // namespace

Index transport_substeps(const Grid& grid, const FlowField& flow, const GeomParams& mu,
                         const PhysParams& nu, double output_dt, double cfl) {
  check_flow(grid, flow);
  const double rate = max_rate(grid, flow, reaction_field(grid, mu, nu));
  if (rate <= 0.0) return 1;
  const double steps = std::ceil(output_dt * rate / cfl);
  return steps < 1.0 ? 1 : (steps > 9e18 ? std::numeric_limits<Index>::max() : Index(steps));
}

Eigen::MatrixXd solve_transport(const Grid& grid, const FlowField& flow, const GeomParams& mu,
                                const PhysParams& nu, double final_time, Index n_t,
                                const TransportOptions& options) {
  check_flow(grid, flow);
  if (n_t < 2) throw ParameterError("transport needs at least two output times");
  if (!(final_time > 0.0)) throw ParameterError("final time must be positive");

  const Index nx = grid.nx();
  const Index ny = grid.ny();
  const double area = grid.cell_area();
  const Vector reaction = reaction_field(grid, mu, nu);
  const double output_dt = final_time / double(n_t);
  const Index substeps = transport_substeps(grid, flow, mu, nu, output_dt, options.cfl);
  if (substeps > options.max_substeps) {
    std::ostringstream os;
    os << "transport needs " << substeps << " substeps per output interval (limit "
       << options.max_substeps << ")";
    throw SolverError(os.str());
  }
  const double dt = output_dt / double(substeps);

  std::vector<Index> inlet_rows;
  Vector inlet_value = Vector::Zero(ny);
  for (Index j = 0; j < ny; ++j) {
    if (grid.boundary_tag(Side::kLeft, j) == BoundaryTag::kInlet) {
      inlet_rows.push_back(j);
      inlet_value[j] = options.inlet_amplitude * inlet_concentration(grid.yc(j));
    }
  }

  Vector u = Vector::Zero(grid.cells());
  for (Index j : inlet_rows) u[grid.cell(0, j)] = inlet_value[j];
  Vector du(grid.cells());
  Eigen::MatrixXd out(grid.cells(), n_t);

  for (Index k = 0; k < n_t; ++k) {
    for (Index s = 0; s < substeps; ++s) {
      du.setZero();
      for (Index j = 0; j < ny; ++j) {
        // Boundary x-faces: inflow carries the inlet value, outflow the cell value.
        const double left = flow.fx(0, j);
        if (left > 0.0) {
          du[grid.cell(0, j)] += left * inlet_value[j];
        } else {
          du[grid.cell(0, j)] += left * u[grid.cell(0, j)];
        }
        const double right = flow.fx(nx, j);
        if (right > 0.0) du[grid.cell(nx - 1, j)] -= right * u[grid.cell(nx - 1, j)];
        for (Index i = 1; i < nx; ++i) {
          const double f = flow.fx(i, j);
          const Index a = grid.cell(i - 1, j);
          const Index b = grid.cell(i, j);
          const double transported = f * (f > 0.0 ? u[a] : u[b]);
          du[a] -= transported;
          du[b] += transported;
        }
      }
      for (Index j = 1; j < ny; ++j) {
        for (Index i = 0; i < nx; ++i) {
          const double f = flow.fy(i, j);
          const Index a = grid.cell(i, j - 1);
          const Index b = grid.cell(i, j);
          const double transported = f * (f > 0.0 ? u[a] : u[b]);
          du[a] -= transported;
          du[b] += transported;
        }
      }
      u += (dt / area) * du - dt * reaction.cwiseProduct(u);
      for (Index j : inlet_rows) u[grid.cell(0, j)] = inlet_value[j];
    }
    out.col(k) = u;
  }
  return out;
}

}  // namespace dodrom::fom
