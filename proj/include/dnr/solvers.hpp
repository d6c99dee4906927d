#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "dnr/data.hpp"
#include "dnr/losses.hpp"
#include "dnr/matrix.hpp"
#include "dnr/rng.hpp"

namespace dnr {

/// Node-centred grid over [x0, x1] (x [y0, y1]) with snapshots in time.
/// One spatial dimension is stored with ny == 1.
struct GridField {
  std::size_t nx = 0;
  std::size_t ny = 1;
  double x0 = -1.0;
  double x1 = 1.0;
  double y0 = 0.0;
  double y1 = 0.0;
  std::size_t components = 1;
  std::vector<double> times;   // snapshot times, strictly increasing
  std::vector<double> values;  // [snapshot][component][iy][ix]
  double dt = 0.0;             // internal step used by the solver

  std::size_t spatial_dims() const { return ny > 1 ? 2 : 1; }
  double dx() const { return (x1 - x0) / static_cast<double>(nx - 1); }
  double dy() const { return ny > 1 ? (y1 - y0) / static_cast<double>(ny - 1) : 0.0; }
  double x(std::size_t ix) const { return x0 + dx() * static_cast<double>(ix); }
  double y(std::size_t iy) const { return ny > 1 ? y0 + dy() * static_cast<double>(iy) : 0.0; }
  std::size_t nodes() const { return nx * ny; }

  double& at(std::size_t k, std::size_t c, std::size_t iy, std::size_t ix) {
    return values[((k * components + c) * ny + iy) * nx + ix];
  }
  double at(std::size_t k, std::size_t c, std::size_t iy, std::size_t ix) const {
    return values[((k * components + c) * ny + iy) * nx + ix];
  }

  void validate() const;
  /// Linear in time and each spatial axis. `point` is (x, t) or (x, y, t).
  /// Throws Error(out_of_domain) outside the grid hull.
  double interpolate(std::span<const double> point, std::size_t component = 0) const;
};

struct SpatialGrid {
  std::size_t nx = 65;
  std::size_t ny = 1;
  double x0 = -1.0;
  double x1 = 1.0;
  double y0 = -1.0;
  double y1 = 1.0;
};

struct HeatBump {
  double cx = 0.0;
  double cy = 0.0;
  double radius = 0.25;
  double temperature = 1.0;
};

struct HeatParams {
  std::vector<HeatBump> bumps;
  double diffusivity = 0.1;
  SpatialGrid grid{41, 41};
  double t_end = 1.0;
  std::size_t snapshots = 51;
  double dt = 0.0;  // 0 picks the largest stable step that lands on snapshots
};

/// dt bound of the explicit 5-point scheme.
double heat_max_dt(double dx, double dy, double diffusivity);

/// Forward Euler, 5-point Laplacian, zero-flux (mirror) boundaries. Initial
/// field is each bump's temperature on its disc, 0 elsewhere.
GridField solve_heat2d(const HeatParams& p);
HeatParams heat_symmetric_defaults();
HeatParams heat_asymmetric_defaults();

/// Trapezoid-weighted sum, exactly conserved by the zero-flux scheme.
double heat_total(const GridField& f, std::size_t snapshot);

enum class BurgersForm { one_d, two_d_scalar, two_d_vector };

std::string_view to_string(BurgersForm f);
BurgersForm parse_burgers_form(std::string_view name);

using InitialField = std::function<double(double x, double y)>;

struct BurgersParams {
  BurgersForm form = BurgersForm::one_d;
  double viscosity = 0.01;
  SpatialGrid grid;
  double t_end = 1.0;
  std::size_t snapshots = 51;
  double dt = 0.0;  // 0 picks a stable step from the initial field
  InitialField u0;
  InitialField v0;  // two_d_vector only
};

inline constexpr double kBurgersStability = 0.5;

/// Second-order upwind advection, central diffusion, three-stage SSP
/// Runge-Kutta in time, Dirichlet boundaries held at their initial values.
/// Stability: dt * (sum_axes max|a| / h + 2 nu sum_axes 1 / h^2) <= kBurgersStability
/// is checked at every step.
GridField solve_burgers(const BurgersParams& p);
BurgersParams burgers_defaults(BurgersForm form);

struct AllenCahnParams {
  double diffusion = 1.0;
  double reaction = 5.0;
  SpatialGrid grid{129};
  double t_end = 1.0;
  std::size_t snapshots = 51;
  double dt = 0.0;
  InitialField u0;
};

/// u_t = D u_xx - r (u^3 - u), periodic in x, forward Euler.
GridField solve_allen_cahn(const AllenCahnParams& p);
AllenCahnParams allen_cahn_defaults();

struct SpacetimeSample {
  Dataset interior;     // labels in physical units
  Dataset boundary;     // initial plane plus spatial faces, physical units
  ConditionSet conditions;
};

inline constexpr std::size_t kDefaultInteriorSamples = 8000;
inline constexpr std::size_t kDefaultBoundarySamples = 8000;

/// Interior points uniform in space x (0, t_end]; boundary points split
/// evenly between the t = 0 plane and each spatial face.
SpacetimeSample sample_spacetime(const GridField& field, std::size_t n_interior, std::size_t n_boundary,
                                 SeededRng& rng);

}  // namespace dnr
