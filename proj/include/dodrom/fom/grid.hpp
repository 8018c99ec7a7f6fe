#pragma once

#include "dodrom/autodiff/tensor.hpp"

#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace dodrom::fom {

class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class BoundaryTag : std::uint8_t { kWall, kInlet, kOutlet };
enum class Side : std::uint8_t { kLeft, kRight, kBottom, kTop };
enum class Region : std::uint8_t { kFree, kCoating, kWashcoat };

/// Uniform cell-centred grid on the unit square. Cell (i, j) sits at column i along x1 and
/// row j along x2; its linear index is j * nx + i.
class Grid {
 public:
  Grid(Index nx, Index ny);

  [[nodiscard]] Index nx() const { return nx_; }
  [[nodiscard]] Index ny() const { return ny_; }
  [[nodiscard]] Index cells() const { return nx_ * ny_; }
  [[nodiscard]] double hx() const { return 1.0 / double(nx_); }
  [[nodiscard]] double hy() const { return 1.0 / double(ny_); }
  [[nodiscard]] double cell_area() const { return hx() * hy(); }
  [[nodiscard]] Index cell(Index i, Index j) const { return j * nx_ + i; }
  [[nodiscard]] double xc(Index i) const { return (double(i) + 0.5) * hx(); }
  [[nodiscard]] double yc(Index j) const { return (double(j) + 0.5) * hy(); }

  /// Diagonal of the mass matrix (cell areas).
  [[nodiscard]] Vector mass() const { return Vector::Constant(cells(), cell_area()); }

  /// Tag of the boundary face on `side` of the boundary cell at position `k` along that side,
  /// decided by the face midpoint. Inlet {0} x (0.8, 1), outlet {1} x (0, 0.2), wall otherwise.
  [[nodiscard]] BoundaryTag boundary_tag(Side side, Index k) const;

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  Index nx_;
  Index ny_;
};

struct Box {
  double lo = 0.0;
  double hi = 1.0;
  [[nodiscard]] bool contains(double v) const { return v >= lo && v <= hi; }
  [[nodiscard]] double width() const { return hi - lo; }
};

struct ParameterRanges {
  Box mu1{0.1, 0.3};
  Box mu2{-std::numbers::pi / 4.0, std::numbers::pi / 4.0};
  Box nu1{0.1, 0.3};
  Box nu2{0.3, 1.0};
};

/// Geometric parameters: coating height and inflow angle (radians).
struct GeomParams {
  double mu1 = 0.2;
  double mu2 = 0.0;
  friend bool operator==(const GeomParams&, const GeomParams&) = default;
};

/// Reaction rates on the coating and washcoat regions.
struct PhysParams {
  double nu1 = 0.2;
  double nu2 = 0.5;
  friend bool operator==(const PhysParams&, const PhysParams&) = default;
};

void validate(const GeomParams& mu, const ParameterRanges& ranges);
void validate(const PhysParams& nu, const ParameterRanges& ranges);

inline constexpr double kCoatingPermeability = 0.02;
inline constexpr double kWashcoatPermeability = 0.5;
inline constexpr double kInflowSpeed = 10.0;
inline constexpr double kInflowSpike = 0.2;

/// Filter region containing height x2 for coating height mu1 (washcoat half-height 0.3 - mu1).
Region region_at(double x2, double mu1);

/// Cell-wise permeability: 1 in the free region, 0.02 on the coating, 0.5 on the washcoat.
Vector permeability_field(const Grid& grid, double mu1, const ParameterRanges& ranges = {});

/// Shifted Poiseuille inflow v_in / (4 eta) (0.1^2 - (x2 - 0.9)^2) (cos mu2, sin mu2).
Eigen::Vector2d inflow_flux(double x2, double mu2);

/// Inlet concentration 0.5 (1 + cos(pi |x2 - 0.9| / 0.1)) inside the band, 0 outside.
double inlet_concentration(double x2);

}  // namespace dodrom::fom
