#include "dnr/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "dnr/error.hpp"

namespace dnr {

void GridField::validate() const {
  if (nx < 2 || ny < 1) throw Error(ErrorCode::invalid_argument, "grid needs at least 2 nodes along x");
  if (!(x1 > x0) || (ny > 1 && !(y1 > y0))) throw Error(ErrorCode::invalid_argument, "grid extent is empty");
  if (components < 1 || components > 2) throw Error(ErrorCode::invalid_argument, "grid holds 1 or 2 components");
  if (times.empty()) throw Error(ErrorCode::invalid_argument, "grid has no snapshots");
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1])) throw Error(ErrorCode::invalid_argument, "snapshot times must increase");
  }
  if (values.size() != times.size() * components * nx * ny) {
    throw Error(ErrorCode::format, "grid holds " + std::to_string(values.size()) + " values, expected " +
                                       std::to_string(times.size() * components * nx * ny));
  }
  for (double v : values)
    if (!std::isfinite(v)) throw Error(ErrorCode::non_finite, "grid field has non-finite values");
}

namespace {

// Cell index and fraction along one axis; throws outside [lo, hi].
std::pair<std::size_t, double> locate(double v, double lo, double hi, std::size_t n, const char* axis) {
  const double slack = 1e-12 * std::max(1.0, hi - lo);
  if (!(v >= lo - slack && v <= hi + slack)) {
    throw Error(ErrorCode::out_of_domain, std::string(axis) + " = " + std::to_string(v) + " outside [" +
                                              std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  const double h = (hi - lo) / static_cast<double>(n - 1);
  const double pos = std::clamp((v - lo) / h, 0.0, static_cast<double>(n - 1));
  const std::size_t i = std::min(static_cast<std::size_t>(pos), n - 2);
  return {i, pos - static_cast<double>(i)};
}

}  // namespace

double GridField::interpolate(std::span<const double> point, std::size_t component) const {
  const std::size_t dims = spatial_dims();
  if (point.size() != dims + 1) {
    throw Error(ErrorCode::dimension_mismatch, "grid point needs " + std::to_string(dims + 1) + " coordinates");
  }
  if (component >= components) throw Error(ErrorCode::invalid_argument, "grid component out of range");
  const double t = point[dims];
  std::size_t k = 0;
  double ft = 0.0;
  if (times.size() > 1) {
    const double slack = 1e-12 * std::max(1.0, times.back() - times.front());
    if (!(t >= times.front() - slack && t <= times.back() + slack)) {
      throw Error(ErrorCode::out_of_domain, "t = " + std::to_string(t) + " outside the simulated interval");
    }
    k = static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), t) - times.begin());
    k = std::clamp<std::size_t>(k, 1, times.size() - 1) - 1;
    ft = std::clamp((t - times[k]) / (times[k + 1] - times[k]), 0.0, 1.0);
  }
  const auto [ix, fx] = locate(point[0], x0, x1, nx, "x");
  std::size_t iy = 0;
  double fy = 0.0;
  if (dims == 2) std::tie(iy, fy) = locate(point[1], y0, y1, ny, "y");

  auto spatial = [&](std::size_t snap) {
    const double a = (1.0 - fx) * at(snap, component, iy, ix) + fx * at(snap, component, iy, ix + 1);
    if (dims == 1) return a;
    const double b = (1.0 - fx) * at(snap, component, iy + 1, ix) + fx * at(snap, component, iy + 1, ix + 1);
    return (1.0 - fy) * a + fy * b;
  };
  const double v0 = spatial(k);
  if (times.size() == 1) return v0;
  return (1.0 - ft) * v0 + ft * spatial(k + 1);
}

namespace {

GridField empty_field(const SpatialGrid& g, std::size_t components, double t_end, std::size_t snapshots) {
  if (g.nx < 3 || g.ny < 1 || g.ny == 2) {
    throw Error(ErrorCode::invalid_argument, "grid needs >= 3 nodes per simulated axis");
  }
  if (!(t_end > 0.0)) throw Error(ErrorCode::invalid_argument, "t_end must be > 0");
  if (snapshots < 2) throw Error(ErrorCode::invalid_argument, "need at least 2 snapshots");
  GridField f;
  f.nx = g.nx;
  f.ny = g.ny;
  f.x0 = g.x0;
  f.x1 = g.x1;
  f.y0 = g.ny > 1 ? g.y0 : 0.0;
  f.y1 = g.ny > 1 ? g.y1 : 0.0;
  f.components = components;
  for (std::size_t k = 0; k < snapshots; ++k) {
    f.times.push_back(t_end * static_cast<double>(k) / static_cast<double>(snapshots - 1));
  }
  f.values.assign(snapshots * components * g.nx * g.ny, 0.0);
  return f;
}

// Steps per snapshot interval so the step is at most `dt_max` (or the requested dt).
std::size_t substeps_for(double interval, double dt_max, double requested, const char* what) {
  if (requested > 0.0) {
    if (requested > dt_max) {
      throw Error(ErrorCode::stability, std::string(what) + " is unstable with dt = " + std::to_string(requested) +
                                            "; need dt <= " + std::to_string(dt_max));
    }
    return static_cast<std::size_t>(std::ceil(interval / requested - 1e-9));
  }
  return static_cast<std::size_t>(std::ceil(interval / dt_max - 1e-9));
}

void store(GridField& f, std::size_t snap, std::size_t c, const std::vector<double>& u) {
  std::copy(u.begin(), u.end(), f.values.begin() + static_cast<std::ptrdiff_t>((snap * f.components + c) * f.nodes()));
}

}  // namespace

double heat_max_dt(double dx, double dy, double diffusivity) {
  const double dx2 = dx * dx;
  const double dy2 = dy * dy;
  return dx2 * dy2 / (2.0 * diffusivity * (dx2 + dy2));
}

GridField solve_heat2d(const HeatParams& p) {
  if (p.grid.ny < 3) throw Error(ErrorCode::invalid_argument, "heat solver needs a 2-D grid");
  if (!(p.diffusivity > 0.0)) throw Error(ErrorCode::invalid_argument, "diffusivity must be > 0");
  GridField f = empty_field(p.grid, 1, p.t_end, p.snapshots);
  const std::size_t nx = f.nx;
  const std::size_t ny = f.ny;
  const double dx = f.dx();
  const double dy = f.dy();
  const double interval = f.times[1] - f.times[0];
  const std::size_t sub = substeps_for(interval, heat_max_dt(dx, dy, p.diffusivity), p.dt, "heat scheme");
  f.dt = interval / static_cast<double>(sub);

  std::vector<double> u(nx * ny, 0.0);
  for (std::size_t iy = 0; iy < ny; ++iy) {
    for (std::size_t ix = 0; ix < nx; ++ix) {
      for (const auto& b : p.bumps) {
        const double rx = f.x(ix) - b.cx;
        const double ry = f.y(iy) - b.cy;
        if (rx * rx + ry * ry <= b.radius * b.radius) u[iy * nx + ix] = std::max(u[iy * nx + ix], b.temperature);
      }
    }
  }
  store(f, 0, 0, u);

  const double rx = p.diffusivity * f.dt / (dx * dx);
  const double ry = p.diffusivity * f.dt / (dy * dy);
  std::vector<double> next(u.size());
  // mirror ghosts: u[-1] = u[1], u[n] = u[n-2]
  auto nb = [](std::size_t i, std::ptrdiff_t d, std::size_t n) {
    const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(i) + d;
    if (j < 0) return std::size_t{1};
    if (j >= static_cast<std::ptrdiff_t>(n)) return n - 2;
    return static_cast<std::size_t>(j);
  };
  for (std::size_t snap = 1; snap < f.times.size(); ++snap) {
    for (std::size_t s = 0; s < sub; ++s) {
      for (std::size_t iy = 0; iy < ny; ++iy) {
        const std::size_t ym = nb(iy, -1, ny);
        const std::size_t yp = nb(iy, 1, ny);
        for (std::size_t ix = 0; ix < nx; ++ix) {
          const double c = u[iy * nx + ix];
          const double lap_x = u[iy * nx + nb(ix, -1, nx)] - 2.0 * c + u[iy * nx + nb(ix, 1, nx)];
          const double lap_y = u[ym * nx + ix] - 2.0 * c + u[yp * nx + ix];
          next[iy * nx + ix] = c + rx * lap_x + ry * lap_y;
        }
      }
      std::swap(u, next);
    }
    store(f, snap, 0, u);
  }
  return f;
}

HeatParams heat_symmetric_defaults() {
  HeatParams p;
  p.bumps = {{-0.4, 0.0, 0.3, 1.0}, {0.4, 0.0, 0.3, 1.0}};
  return p;
}

HeatParams heat_asymmetric_defaults() {
  HeatParams p;
  p.bumps = {{-0.4, 0.0, 0.3, 1.0}, {0.4, 0.0, 0.3, 0.5}};
  return p;
}

double heat_total(const GridField& f, std::size_t snapshot) {
  double total = 0.0;
  for (std::size_t iy = 0; iy < f.ny; ++iy) {
    const double wy = (f.ny > 1 && (iy == 0 || iy + 1 == f.ny)) ? 0.5 : 1.0;
    for (std::size_t ix = 0; ix < f.nx; ++ix) {
      const double wx = (ix == 0 || ix + 1 == f.nx) ? 0.5 : 1.0;
      total += wx * wy * f.at(snapshot, 0, iy, ix);
    }
  }
  return total;
}

std::string_view to_string(BurgersForm f) {
  switch (f) {
    case BurgersForm::one_d: return "1d";
    case BurgersForm::two_d_scalar: return "2d_scalar";
    case BurgersForm::two_d_vector: return "2d_vector";
  }
  return "unknown";
}

BurgersForm parse_burgers_form(std::string_view name) {
  for (BurgersForm f : {BurgersForm::one_d, BurgersForm::two_d_scalar, BurgersForm::two_d_vector})
    if (to_string(f) == name) return f;
  throw Error(ErrorCode::invalid_argument, "unknown Burgers form '" + std::string(name) + "'");
}

namespace {

// Second-order one-sided difference against the direction of travel; first
// order on the node next to the boundary. `s` is the stride between neighbours.
inline double upwind(const double* w, double a, std::size_t i, std::size_t n, std::size_t s, double h) {
  if (a > 0.0) {
    if (i >= 2) return (3.0 * w[0] - 4.0 * w[-static_cast<std::ptrdiff_t>(s)] + w[-2 * static_cast<std::ptrdiff_t>(s)]) / (2.0 * h);
    return (w[0] - w[-static_cast<std::ptrdiff_t>(s)]) / h;
  }
  if (i + 3 <= n) return (-3.0 * w[0] + 4.0 * w[s] - w[2 * s]) / (2.0 * h);
  return (w[s] - w[0]) / h;
}

}  // namespace

GridField solve_burgers(const BurgersParams& p) {
  const bool two_d = p.form != BurgersForm::one_d;
  const bool vector = p.form == BurgersForm::two_d_vector;
  if (two_d != (p.grid.ny > 1)) {
    throw Error(ErrorCode::invalid_argument, std::string(to_string(p.form)) + " Burgers needs a " +
                                                 (two_d ? "2-D" : "1-D") + " grid");
  }
  if (!p.u0 || (vector && !p.v0)) throw Error(ErrorCode::invalid_argument, "Burgers initial field missing");
  if (!(p.viscosity >= 0.0)) throw Error(ErrorCode::invalid_argument, "viscosity must be >= 0");

  GridField f = empty_field(p.grid, vector ? 2 : 1, p.t_end, p.snapshots);
  const std::size_t nx = f.nx;
  const std::size_t ny = f.ny;
  const std::size_t n = nx * ny;
  const double dx = f.dx();
  const double dy = two_d ? f.dy() : 0.0;
  const std::size_t comps = vector ? 2 : 1;
  // state: component c occupies [c * n, (c + 1) * n)
  std::vector<double> w(comps * n);
  for (std::size_t iy = 0; iy < ny; ++iy) {
    for (std::size_t ix = 0; ix < nx; ++ix) {
      w[iy * nx + ix] = p.u0(f.x(ix), f.y(iy));
      if (vector) w[n + iy * nx + ix] = p.v0(f.x(ix), f.y(iy));
    }
  }

  auto rate_of = [&](const std::vector<double>& state) {
    double umax = 0.0;
    double vmax = 0.0;
    for (std::size_t i = 0; i < n; ++i) umax = std::max(umax, std::abs(state[i]));
    if (vector)
      for (std::size_t i = 0; i < n; ++i) vmax = std::max(vmax, std::abs(state[n + i]));
    double rate = 2.0 * p.viscosity / (dx * dx) + umax / dx;
    if (!two_d) return rate;
    // scalar form advects with u along both axes
    return rate + 2.0 * p.viscosity / (dy * dy) + (vector ? vmax : umax) / dy;
  };

  const double nu = p.viscosity;
  auto rhs = [&](const std::vector<double>& state, std::vector<double>& out) {
    std::fill(out.begin(), out.end(), 0.0);
    const double* u = state.data();
    const double* v = vector ? state.data() + n : u;
    for (std::size_t iy = 0; iy < ny; ++iy) {
      for (std::size_t ix = 0; ix < nx; ++ix) {
        const std::size_t i = iy * nx + ix;
        const bool edge = ix == 0 || ix + 1 == nx || (two_d && (iy == 0 || iy + 1 == ny));
        if (edge) continue;  // Dirichlet: boundary keeps its initial value
        const double ax = u[i];
        const double ay = v[i];
        for (std::size_t c = 0; c < comps; ++c) {
          const double* q = state.data() + c * n + i;
          if (!two_d) {
            out[i] = nu * (q[-1] - 2.0 * q[0] + q[1]) / (dx * dx) - ax * upwind(q, ax, ix, nx, 1, dx);
            continue;
          }
          const double adv = ax * upwind(q, ax, ix, nx, 1, dx) + ay * upwind(q, ay, iy, ny, nx, dy);
          const double lap = (q[-1] - 2.0 * q[0] + q[1]) / (dx * dx) +
                             (q[-static_cast<std::ptrdiff_t>(nx)] - 2.0 * q[0] + q[nx]) / (dy * dy);
          out[c * n + i] = nu * lap - adv;
        }
      }
    }
  };

  const double interval = f.times[1] - f.times[0];
  const double rate0 = rate_of(w);
  const double dt_max = rate0 > 0.0 ? kBurgersStability / rate0 : interval;
  // half the bound leaves room for the field to sharpen
  const std::size_t sub = substeps_for(interval, p.dt > 0.0 ? dt_max : 0.5 * dt_max, p.dt, "Burgers scheme");
  f.dt = interval / static_cast<double>(sub);

  for (std::size_t c = 0; c < comps; ++c) store(f, 0, c, std::vector<double>(w.begin() + c * n, w.begin() + (c + 1) * n));
  std::vector<double> k1(w.size());
  std::vector<double> k2(w.size());
  std::vector<double> k3(w.size());
  std::vector<double> stage(w.size());
  const double dt = f.dt;

  // three-stage strong-stability-preserving Runge-Kutta, written in increments
  // so a stationary state is reproduced exactly
  for (std::size_t snap = 1; snap < f.times.size(); ++snap) {
    for (std::size_t s = 0; s < sub; ++s) {
      const double rate = rate_of(w);
      if (dt * rate > kBurgersStability * (1.0 + 1e-12)) {
        throw Error(ErrorCode::stability, "Burgers step became unstable at t = " +
                                              std::to_string(f.times[snap - 1] + static_cast<double>(s) * dt) +
                                              "; need dt <= " + std::to_string(kBurgersStability / rate));
      }
      rhs(w, k1);
      for (std::size_t i = 0; i < w.size(); ++i) stage[i] = w[i] + dt * k1[i];
      rhs(stage, k2);
      for (std::size_t i = 0; i < w.size(); ++i) stage[i] = w[i] + 0.25 * dt * (k1[i] + k2[i]);
      rhs(stage, k3);
      for (std::size_t i = 0; i < w.size(); ++i) w[i] += dt * (k1[i] + k2[i] + 4.0 * k3[i]) / 6.0;
    }
    for (double x : w)
      if (!std::isfinite(x)) throw Error(ErrorCode::non_finite, "Burgers field became non-finite");
    for (std::size_t c = 0; c < comps; ++c) store(f, snap, c, std::vector<double>(w.begin() + c * n, w.begin() + (c + 1) * n));
  }
  return f;
}

BurgersParams burgers_defaults(BurgersForm form) {
  constexpr double pi = std::numbers::pi;
  BurgersParams p;
  p.form = form;
  if (form == BurgersForm::one_d) {
    p.grid = SpatialGrid{513, 1};
    p.u0 = [](double x, double) { return -std::sin(pi * x); };
  } else {
    p.grid = SpatialGrid{65, 65};
    if (form == BurgersForm::two_d_scalar) {
      p.u0 = [](double x, double y) { return std::sin(pi * x) * std::sin(pi * y); };
    } else {
      // v0 is u0 mirrored across x = y; both vanish on the boundary
      p.u0 = [](double x, double y) { return std::sin(pi * x) * std::cos(0.5 * pi * y); };
      p.v0 = [](double x, double y) { return std::sin(pi * y) * std::cos(0.5 * pi * x); };
    }
  }
  return p;
}

GridField solve_allen_cahn(const AllenCahnParams& p) {
  if (p.grid.ny != 1) throw Error(ErrorCode::invalid_argument, "Allen-Cahn solver is 1-D");
  if (!p.u0) throw Error(ErrorCode::invalid_argument, "Allen-Cahn initial field missing");
  if (!(p.diffusion >= 0.0) || !(p.reaction >= 0.0)) {
    throw Error(ErrorCode::invalid_argument, "Allen-Cahn coefficients must be >= 0");
  }
  GridField f = empty_field(p.grid, 1, p.t_end, p.snapshots);
  const std::size_t nx = f.nx;
  const std::size_t period = nx - 1;  // last node duplicates the first
  const double dx = f.dx();
  std::vector<double> u(nx);
  for (std::size_t ix = 0; ix < nx; ++ix) u[ix] = p.u0(f.x(ix), 0.0);
  u[nx - 1] = u[0];

  auto rate_for = [&](const std::vector<double>& w) {
    double m = 0.0;
    for (double x : w) m = std::max(m, std::abs(3.0 * x * x - 1.0));
    return 2.0 * p.diffusion / (dx * dx) + p.reaction * m;
  };
  const double interval = f.times[1] - f.times[0];
  const double rate0 = rate_for(u);
  const std::size_t sub = substeps_for(interval, p.dt > 0.0 ? 1.0 / rate0 : 0.5 / rate0, p.dt, "Allen-Cahn scheme");
  f.dt = interval / static_cast<double>(sub);
  store(f, 0, 0, u);

  std::vector<double> un(nx);
  for (std::size_t snap = 1; snap < f.times.size(); ++snap) {
    for (std::size_t s = 0; s < sub; ++s) {
      if (f.dt * rate_for(u) > 1.0 + 1e-12) {
        throw Error(ErrorCode::stability, "Allen-Cahn step became unstable; need dt <= " +
                                              std::to_string(1.0 / rate_for(u)));
      }
      for (std::size_t ix = 0; ix < period; ++ix) {
        const double left = u[(ix + period - 1) % period];
        const double right = u[(ix + 1) % period];
        const double c = u[ix];
        un[ix] = c + f.dt * (p.diffusion * (left - 2.0 * c + right) / (dx * dx) - p.reaction * (c * c * c - c));
      }
      un[nx - 1] = un[0];
      std::swap(u, un);
    }
    store(f, snap, 0, u);
  }
  return f;
}

AllenCahnParams allen_cahn_defaults() {
  AllenCahnParams p;
  p.u0 = [](double x, double) { return x * x * std::cos(std::numbers::pi * x); };
  return p;
}

SpacetimeSample sample_spacetime(const GridField& field, std::size_t n_interior, std::size_t n_boundary,
                                 SeededRng& rng) {
  field.validate();
  if (n_interior < 1 || n_boundary < 1) throw Error(ErrorCode::invalid_argument, "sample counts must be >= 1");
  const std::size_t dims = field.spatial_dims();
  const std::size_t cols = dims + 1;
  const std::size_t comps = field.components;
  const double t0 = field.times.front();
  const double t_end = field.times.back();

  auto time_sample = [&] { return t0 + (t_end - t0) * (1.0 - rng.uniform()); };  // (t0, t_end]
  auto label = [&](std::span<const double> pt, Matrix& labels, std::size_t row) {
    for (std::size_t c = 0; c < comps; ++c) labels(row, c) = field.interpolate(pt, c);
  };

  SpacetimeSample out;
  Dataset& in = out.interior;
  in.inputs = Matrix(n_interior, cols);
  in.labels = Matrix(n_interior, comps);
  for (std::size_t s = 0; s < n_interior; ++s) {
    auto row = in.inputs.row(s);
    row[0] = rng.uniform(field.x0, field.x1);
    if (dims == 2) row[1] = rng.uniform(field.y0, field.y1);
    row[dims] = time_sample();
    label(row, in.labels, s);
  }
  in.scaling = ScalingRecord::identity(comps);
  in.provenance = "spacetime-interior n=" + std::to_string(n_interior) + " seed=" + std::to_string(rng.seed());

  // manifolds: t = t0, then x = x0, x = x1 (and y = y0, y = y1)
  const std::size_t manifolds = 1 + 2 * dims;
  std::vector<std::size_t> counts(manifolds, n_boundary / manifolds);
  for (std::size_t m = 0; m < n_boundary % manifolds; ++m) ++counts[m];

  Matrix ic_pts(counts[0], cols);
  Matrix ic_tgt(counts[0], comps);
  for (std::size_t s = 0; s < counts[0]; ++s) {
    auto row = ic_pts.row(s);
    row[0] = rng.uniform(field.x0, field.x1);
    if (dims == 2) row[1] = rng.uniform(field.y0, field.y1);
    row[dims] = t0;
    label(row, ic_tgt, s);
  }
  const std::size_t n_bc = n_boundary - counts[0];
  Matrix bc_pts(n_bc, cols);
  Matrix bc_tgt(n_bc, comps);
  std::size_t r = 0;
  for (std::size_t m = 1; m < manifolds; ++m) {
    const std::size_t axis = (m - 1) / 2;
    const bool upper = (m - 1) % 2 == 1;
    for (std::size_t s = 0; s < counts[m]; ++s, ++r) {
      auto row = bc_pts.row(r);
      row[0] = rng.uniform(field.x0, field.x1);
      if (dims == 2) row[1] = rng.uniform(field.y0, field.y1);
      if (axis == 0) row[0] = upper ? field.x1 : field.x0;
      if (axis == 1) row[1] = upper ? field.y1 : field.y0;
      row[dims] = time_sample();
      label(row, bc_tgt, r);
    }
  }

  Dataset& bd = out.boundary;
  bd.inputs = Matrix(n_boundary, cols);
  bd.labels = Matrix(n_boundary, comps);
  for (std::size_t s = 0; s < counts[0]; ++s) {
    for (std::size_t c = 0; c < cols; ++c) bd.inputs(s, c) = ic_pts(s, c);
    for (std::size_t c = 0; c < comps; ++c) bd.labels(s, c) = ic_tgt(s, c);
  }
  for (std::size_t s = 0; s < n_bc; ++s) {
    for (std::size_t c = 0; c < cols; ++c) bd.inputs(counts[0] + s, c) = bc_pts(s, c);
    for (std::size_t c = 0; c < comps; ++c) bd.labels(counts[0] + s, c) = bc_tgt(s, c);
  }
  bd.scaling = ScalingRecord::identity(comps);
  bd.provenance = "spacetime-boundary n=" + std::to_string(n_boundary) + " seed=" + std::to_string(rng.seed());

  out.conditions.interior = in.inputs;
  out.conditions.ic_points = std::move(ic_pts);
  out.conditions.ic_targets = std::move(ic_tgt);
  out.conditions.bc_points = std::move(bc_pts);
  out.conditions.bc_targets = std::move(bc_tgt);
  return out;
}

}  // namespace dnr
