#include "dodrom/fom/grid.hpp"

#include <cmath>
#include <sstream>

namespace dodrom::fom {

Grid::Grid(Index nx, Index ny) : nx_(nx), ny_(ny) {
  if (nx < 2 || ny < 2) throw ParameterError("grid needs at least 2 x 2 cells");
}

BoundaryTag Grid::boundary_tag(Side side, Index k) const {
  switch (side) {
    case Side::kLeft: {
      const double y = yc(k);
      return (y > 0.8 && y < 1.0) ? BoundaryTag::kInlet : BoundaryTag::kWall;
    }
    case Side::kRight: {
      const double y = yc(k);
      return (y > 0.0 && y < 0.2) ? BoundaryTag::kOutlet : BoundaryTag::kWall;
    }
    default:
      return BoundaryTag::kWall;
  }
}

namespace {

void check(const char* name, double v, const Box& box) {
  if (!std::isfinite(v) || !box.contains(v)) {
    std::ostringstream os;
    os << name << " = " << v << " outside [" << box.lo << ", " << box.hi << "]";
    throw ParameterError(os.str());
  }
}

}  // namespace

void validate(const GeomParams& mu, const ParameterRanges& ranges) {
  check("mu1", mu.mu1, ranges.mu1);
  check("mu2", mu.mu2, ranges.mu2);
  if (mu.mu1 < 0.0 || mu.mu1 > 0.3) throw ParameterError("mu1 must lie in [0, 0.3] for the filter geometry");
}

void validate(const PhysParams& nu, const ParameterRanges& ranges) {
  check("nu1", nu.nu1, ranges.nu1);
  check("nu2", nu.nu2, ranges.nu2);
}

Region region_at(double x2, double mu1) {
  const double washcoat = 0.3 - mu1;
  const double d = std::abs(x2 - 0.5);
  if (d < washcoat) return Region::kWashcoat;
  if (d > washcoat && d < washcoat + mu1) return Region::kCoating;
  return Region::kFree;
}

Vector permeability_field(const Grid& grid, double mu1, const ParameterRanges& ranges) {
  check("mu1", mu1, ranges.mu1);
  Vector k(grid.cells());
  for (Index j = 0; j < grid.ny(); ++j) {
    double kj = 1.0;
    switch (region_at(grid.yc(j), mu1)) {
      case Region::kCoating: kj = kCoatingPermeability; break;
      case Region::kWashcoat: kj = kWashcoatPermeability; break;
      case Region::kFree: break;
    }
    for (Index i = 0; i < grid.nx(); ++i) k[grid.cell(i, j)] = kj;
  }
  return k;
}

Eigen::Vector2d inflow_flux(double x2, double mu2) {
  const double s = x2 - 0.9;
  const double magnitude = kInflowSpeed / (4.0 * kInflowSpike) * (0.1 * 0.1 - s * s);
  return {magnitude * std::cos(mu2), magnitude * std::sin(mu2)};
}

double inlet_concentration(double x2) {
  const double d = std::abs(x2 - 0.9);
  if (d >= 0.1) return 0.0;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * d / 0.1));
}

}  // namespace dodrom::fom
