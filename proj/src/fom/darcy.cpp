#include "dodrom/fom/darcy.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include <sstream>
#include <vector>

namespace dodrom::fom {

Vector FlowField::divergence() const {
  Vector div(nx * ny);
  for (Index j = 0; j < ny; ++j) {
    for (Index i = 0; i < nx; ++i) {
      div[j * nx + i] = fx(i + 1, j) - fx(i, j) + fy(i, j + 1) - fy(i, j);
    }
  }
  return div;
}

double FlowField::inflow(const Grid& grid) const {
  double total = 0.0;
  for (Index j = 0; j < ny; ++j) {
    if (grid.boundary_tag(Side::kLeft, j) == BoundaryTag::kInlet) total += fx(0, j);
  }
  return total;
}

double FlowField::outflow(const Grid& grid) const {
  double total = 0.0;
  for (Index j = 0; j < ny; ++j) {
    if (grid.boundary_tag(Side::kRight, j) == BoundaryTag::kOutlet) total += fx(nx, j);
  }
  return total;
}

FlowField FlowField::zero(const Grid& grid) {
  FlowField f;
  f.nx = grid.nx();
  f.ny = grid.ny();
  f.pressure = Vector::Zero(grid.cells());
  f.flux_x = Vector::Zero((f.nx + 1) * f.ny);
  f.flux_y = Vector::Zero(f.nx * (f.ny + 1));
  f.velocity = Eigen::MatrixX2d::Zero(grid.cells(), 2);
  return f;
}

FlowField solve_darcy(const Grid& grid, const GeomParams& mu, const ParameterRanges& ranges,
                      const DarcyOptions& options) {
  validate(mu, ranges);
  const Index nx = grid.nx();
  const Index ny = grid.ny();
  const Index n = grid.cells();
  const double hx = grid.hx();
  const double hy = grid.hy();
  const Vector k = options.disable_filter ? Vector::Ones(n) : permeability_field(grid, mu.mu1, ranges);
  auto harmonic = [](double a, double b) { return 2.0 * a * b / (a + b); };

  // Transmissibilities: flux from cell a to cell b is T (p_a - p_b).
  Vector tx = Vector::Zero((nx + 1) * ny);
  Vector ty = Vector::Zero(nx * (ny + 1));
  for (Index j = 0; j < ny; ++j) {
    for (Index i = 1; i < nx; ++i) {
      tx[j * (nx + 1) + i] = harmonic(k[grid.cell(i - 1, j)], k[grid.cell(i, j)]) * hy / hx;
    }
    if (grid.boundary_tag(Side::kRight, j) == BoundaryTag::kOutlet) {
      tx[j * (nx + 1) + nx] = k[grid.cell(nx - 1, j)] * hy / (0.5 * hx);
    }
  }
  for (Index j = 1; j < ny; ++j) {
    for (Index i = 0; i < nx; ++i) {
      ty[j * nx + i] = harmonic(k[grid.cell(i, j - 1)], k[grid.cell(i, j)]) * hx / hy;
    }
  }

  Vector rhs = Vector::Zero(n);
  Vector inlet = Vector::Zero(ny);
  for (Index j = 0; j < ny; ++j) {
    if (grid.boundary_tag(Side::kLeft, j) == BoundaryTag::kInlet) {
      // Outward normal is -e1, so the inward flux is j_1 * |face|.
      inlet[j] = inflow_flux(grid.yc(j), mu.mu2)[0] * hy;
      rhs[grid.cell(0, j)] += inlet[j];
    }
  }

  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(std::size_t(5 * n));
  Vector diag = Vector::Zero(n);
  for (Index j = 0; j < ny; ++j) {
    for (Index i = 0; i <= nx; ++i) {
      const double t = tx[j * (nx + 1) + i];
      if (t == 0.0) continue;
      if (i > 0 && i < nx) {
        const Index a = grid.cell(i - 1, j);
        const Index b = grid.cell(i, j);
        diag[a] += t;
        diag[b] += t;
        entries.emplace_back(a, b, -t);
        entries.emplace_back(b, a, -t);
      } else if (i == nx) {
        diag[grid.cell(nx - 1, j)] += t;
      }
    }
  }
  for (Index j = 1; j < ny; ++j) {
    for (Index i = 0; i < nx; ++i) {
      const double t = ty[j * nx + i];
      const Index a = grid.cell(i, j - 1);
      const Index b = grid.cell(i, j);
      diag[a] += t;
      diag[b] += t;
      entries.emplace_back(a, b, -t);
      entries.emplace_back(b, a, -t);
    }
  }
  for (Index c = 0; c < n; ++c) entries.emplace_back(c, c, diag[c]);
  Eigen::SparseMatrix<double> A(n, n);
  A.setFromTriplets(entries.begin(), entries.end());

  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                           Eigen::DiagonalPreconditioner<double>>
      cg;
  cg.setTolerance(options.tolerance);
  cg.setMaxIterations(options.max_iterations > 0 ? options.max_iterations : 20 * n);
  cg.compute(A);
  FlowField f = FlowField::zero(grid);
  f.pressure = cg.solve(rhs);
  f.iterations = int(cg.iterations());
  f.residual = (A * f.pressure - rhs).norm() / rhs.norm();
  if (cg.info() != Eigen::Success) {
    std::ostringstream os;
    os << "Darcy CG did not converge for mu = (" << mu.mu1 << ", " << mu.mu2 << "): relative residual "
       << f.residual << " after " << f.iterations << " iterations";
    throw SolverError(os.str());
  }

  const Vector& p = f.pressure;
  for (Index j = 0; j < ny; ++j) {
    f.fx(0, j) = inlet[j];
    for (Index i = 1; i < nx; ++i) {
      f.fx(i, j) = tx[j * (nx + 1) + i] * (p[grid.cell(i - 1, j)] - p[grid.cell(i, j)]);
    }
    f.fx(nx, j) = tx[j * (nx + 1) + nx] * p[grid.cell(nx - 1, j)];
  }
  for (Index j = 1; j < ny; ++j) {
    for (Index i = 0; i < nx; ++i) {
      f.fy(i, j) = ty[j * nx + i] * (p[grid.cell(i, j - 1)] - p[grid.cell(i, j)]);
    }
  }
  for (Index j = 0; j < ny; ++j) {
    for (Index i = 0; i < nx; ++i) {
      const Index c = grid.cell(i, j);
      f.velocity(c, 0) = 0.5 * (f.fx(i, j) + f.fx(i + 1, j)) / hy;
      f.velocity(c, 1) = 0.5 * (f.fy(i, j) + f.fy(i, j + 1)) / hx;
    }
  }
  return f;
}

}  // namespace dodrom::fom
