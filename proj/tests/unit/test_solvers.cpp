#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "dnr/error.hpp"
#include "dnr/solvers.hpp"

using namespace dnr;

namespace {

constexpr double kPi = std::numbers::pi;

double snapshot_max(const GridField& f, std::size_t k) {
  double m = -INFINITY;
  for (std::size_t iy = 0; iy < f.ny; ++iy)
    for (std::size_t ix = 0; ix < f.nx; ++ix) m = std::max(m, f.at(k, 0, iy, ix));
  return m;
}

double snapshot_min(const GridField& f, std::size_t k) {
  double m = INFINITY;
  for (std::size_t iy = 0; iy < f.ny; ++iy)
    for (std::size_t ix = 0; ix < f.nx; ++ix) m = std::min(m, f.at(k, 0, iy, ix));
  return m;
}

HeatParams small_heat(std::vector<HeatBump> bumps) {
  HeatParams p;
  p.bumps = std::move(bumps);
  p.grid = SpatialGrid{33, 33};
  p.t_end = 0.5;
  p.snapshots = 11;
  return p;
}

/// Burgers 1d at t_end on an nx grid, restricted to the nodes of the coarsest grid.
std::vector<double> burgers_on_coarse(std::size_t nx, std::size_t coarse_nx, double t_end) {
  BurgersParams p = burgers_defaults(BurgersForm::one_d);
  p.grid = SpatialGrid{nx, 1};
  p.t_end = t_end;
  p.snapshots = 2;
  const GridField f = solve_burgers(p);
  const std::size_t stride = (nx - 1) / (coarse_nx - 1);
  std::vector<double> out;
  for (std::size_t i = 0; i < coarse_nx; ++i) out.push_back(f.at(1, 0, 0, i * stride));
  return out;
}

double l2_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s / static_cast<double>(a.size()));
}

}  // namespace

TEST_CASE("heat: zero initial field stays zero") {
  const GridField f = solve_heat2d(small_heat({}));
  f.validate();
  for (double v : f.values) CHECK(v == 0.0);
}

TEST_CASE("heat: centred bump stays symmetric under x <-> y") {
  const GridField f = solve_heat2d(small_heat({{0.0, 0.0, 0.4, 1.0}}));
  double worst = 0.0;
  for (std::size_t k = 0; k < f.times.size(); ++k)
    for (std::size_t iy = 0; iy < f.ny; ++iy)
      for (std::size_t ix = 0; ix < f.nx; ++ix) worst = std::max(worst, std::abs(f.at(k, 0, iy, ix) - f.at(k, 0, ix, iy)));
  CHECK(worst <= 1e-12);
}

TEST_CASE("heat: maximum principle and conservation hold") {
  for (const HeatParams& base : {heat_symmetric_defaults(), heat_asymmetric_defaults()}) {
    HeatParams p = base;
    p.t_end = 0.5;
    p.snapshots = 26;
    const GridField f = solve_heat2d(p);
    const double total0 = heat_total(f, 0);
    CHECK(total0 > 0.0);
    for (std::size_t k = 1; k < f.times.size(); ++k) {
      CHECK(snapshot_max(f, k) <= snapshot_max(f, k - 1) + 1e-15);
      CHECK(snapshot_min(f, k) >= snapshot_min(f, k - 1) - 1e-15);
      CHECK(std::abs(heat_total(f, k) - total0) <= 1e-8 * total0);
    }
    CHECK(f.dt <= heat_max_dt(f.dx(), f.dy(), p.diffusivity));
  }
}

TEST_CASE("heat: asymmetric defaults break the mirror symmetry") {
  const GridField f = solve_heat2d(heat_asymmetric_defaults());
  const std::size_t k = f.times.size() - 1;
  const std::size_t mid = f.ny / 2;
  CHECK(f.at(k, 0, mid, 5) > f.at(k, 0, mid, f.nx - 6));
}

TEST_CASE("heat: an unstable explicit step names the required dt") {
  HeatParams p = small_heat({{0.0, 0.0, 0.3, 1.0}});
  p.dt = 1.0;
  try {
    solve_heat2d(p);
    FAIL("expected a stability error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::stability);
    CHECK(std::string(e.what()).find("need dt <=") != std::string::npos);
  }
  p.dt = 0.5 * heat_max_dt(2.0 / 32, 2.0 / 32, p.diffusivity);
  CHECK_NOTHROW(solve_heat2d(p));
}

TEST_CASE("heat: snapshots sit at the requested times") {
  const GridField f = solve_heat2d(heat_symmetric_defaults());
  CHECK(f.times.size() == 51);
  CHECK(f.times.front() == 0.0);
  CHECK(f.times[25] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(f.times.back() == 1.0);
}

TEST_CASE("burgers: constant initial field stays constant") {
  for (BurgersForm form : {BurgersForm::one_d, BurgersForm::two_d_scalar, BurgersForm::two_d_vector}) {
    BurgersParams p = burgers_defaults(form);
    if (form != BurgersForm::one_d) p.grid = SpatialGrid{17, 17};
    p.t_end = 0.3;
    p.snapshots = 4;
    p.u0 = [](double, double) { return 0.7; };
    p.v0 = [](double, double) { return -0.4; };
    const GridField f = solve_burgers(p);
    for (std::size_t k = 0; k < f.times.size(); ++k) {
      for (std::size_t iy = 0; iy < f.ny; ++iy) {
        for (std::size_t ix = 0; ix < f.nx; ++ix) {
          CHECK(f.at(k, 0, iy, ix) == 0.7);
          if (f.components == 2) CHECK(f.at(k, 1, iy, ix) == -0.4);
        }
      }
    }
  }
}

TEST_CASE("burgers 1d: grid refinement converges with order >= 1 before the shock") {
  // shock forms at t = 1/pi; stop well before
  const double t_end = 0.2;
  const std::size_t coarse = 33;
  const auto u1 = burgers_on_coarse(33, coarse, t_end);
  const auto u2 = burgers_on_coarse(65, coarse, t_end);
  const auto u3 = burgers_on_coarse(129, coarse, t_end);
  const auto u4 = burgers_on_coarse(257, coarse, t_end);
  const double e1 = l2_diff(u1, u2);
  const double e2 = l2_diff(u2, u3);
  const double e3 = l2_diff(u3, u4);
  CHECK(e2 < e1);
  CHECK(e3 < e2);
  CHECK(std::log2(e2 / e3) >= 1.0);
}

TEST_CASE("burgers 1d: boundaries hold their initial values and the field stays bounded") {
  const GridField f = solve_burgers(burgers_defaults(BurgersForm::one_d));
  const std::size_t last = f.nx - 1;
  for (std::size_t k = 0; k < f.times.size(); ++k) {
    CHECK(f.at(k, 0, 0, 0) == f.at(0, 0, 0, 0));
    CHECK(f.at(k, 0, 0, last) == f.at(0, 0, 0, last));
    CHECK(snapshot_max(f, k) <= 1.0 + 1e-12);
    CHECK(snapshot_min(f, k) >= -1.0 - 1e-12);
  }
  // steepening: the max gradient at t = 0.5 exceeds the initial pi
  double grad = 0.0;
  const std::size_t k = 25;
  for (std::size_t i = 0; i + 1 < f.nx; ++i) grad = std::max(grad, std::abs(f.at(k, 0, 0, i + 1) - f.at(k, 0, 0, i)) / f.dx());
  CHECK(grad > 2.0 * kPi);
}

TEST_CASE("burgers 2d vector: equal components stay equal") {
  BurgersParams p = burgers_defaults(BurgersForm::two_d_vector);
  p.grid = SpatialGrid{33, 33};
  p.t_end = 0.5;
  p.snapshots = 6;
  p.u0 = [](double x, double y) { return std::sin(kPi * x) * std::sin(kPi * y); };
  p.v0 = p.u0;
  const GridField f = solve_burgers(p);
  double worst = 0.0;
  for (std::size_t k = 0; k < f.times.size(); ++k)
    for (std::size_t iy = 0; iy < f.ny; ++iy)
      for (std::size_t ix = 0; ix < f.nx; ++ix) worst = std::max(worst, std::abs(f.at(k, 0, iy, ix) - f.at(k, 1, iy, ix)));
  CHECK(worst <= 1e-10);
}

TEST_CASE("burgers 2d vector: transposed components stay transposed") {
  BurgersParams p = burgers_defaults(BurgersForm::two_d_vector);
  p.grid = SpatialGrid{33, 33};
  p.t_end = 0.5;
  p.snapshots = 6;
  const GridField f = solve_burgers(p);
  double worst = 0.0;
  for (std::size_t k = 0; k < f.times.size(); ++k)
    for (std::size_t iy = 0; iy < f.ny; ++iy)
      for (std::size_t ix = 0; ix < f.nx; ++ix) worst = std::max(worst, std::abs(f.at(k, 0, iy, ix) - f.at(k, 1, ix, iy)));
  CHECK(worst <= 1e-10);
}

TEST_CASE("burgers 2d scalar: symmetric data stays symmetric about x = y") {
  BurgersParams p = burgers_defaults(BurgersForm::two_d_scalar);
  p.grid = SpatialGrid{33, 33};
  p.t_end = 0.5;
  p.snapshots = 6;
  const GridField f = solve_burgers(p);
  double worst = 0.0;
  for (std::size_t iy = 0; iy < f.ny; ++iy)
    for (std::size_t ix = 0; ix < f.nx; ++ix) worst = std::max(worst, std::abs(f.at(5, 0, iy, ix) - f.at(5, 0, ix, iy)));
  CHECK(worst <= 1e-10);
}

TEST_CASE("burgers rejects mismatched grids and unstable steps") {
  BurgersParams p = burgers_defaults(BurgersForm::two_d_scalar);
  p.grid = SpatialGrid{33, 1};
  CHECK_THROWS_AS(solve_burgers(p), Error);
  p = burgers_defaults(BurgersForm::one_d);
  p.dt = 0.1;
  try {
    solve_burgers(p);
    FAIL("expected a stability error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::stability);
  }
  CHECK(parse_burgers_form("2d_vector") == BurgersForm::two_d_vector);
  CHECK_THROWS_AS(parse_burgers_form("3d"), Error);
}

TEST_CASE("allen-cahn: periodic, bounded and driven towards the wells") {
  const GridField f = solve_allen_cahn(allen_cahn_defaults());
  f.validate();
  const std::size_t last = f.nx - 1;
  for (std::size_t k = 0; k < f.times.size(); ++k) {
    CHECK(f.at(k, 0, 0, 0) == f.at(k, 0, 0, last));
    CHECK(snapshot_max(f, k) <= 1.0 + 1e-12);
    CHECK(snapshot_min(f, k) >= -1.0 - 1e-12);
  }
  // the initial field is even in x, so the solution stays even
  for (std::size_t i = 0; i < f.nx; ++i) CHECK(f.at(50, 0, 0, i) == doctest::Approx(f.at(50, 0, 0, last - i)).epsilon(1e-12));
  CHECK(snapshot_min(f, 50) < -0.9);
}

TEST_CASE("allen-cahn: zero field is a steady state") {
  AllenCahnParams p = allen_cahn_defaults();
  p.u0 = [](double, double) { return 0.0; };
  const GridField f = solve_allen_cahn(p);
  for (double v : f.values) CHECK(v == 0.0);
}

TEST_CASE("interpolation is exact at nodes and rejects points off the grid") {
  const GridField f = solve_heat2d(small_heat({{0.2, -0.1, 0.4, 1.0}}));
  for (std::size_t k : {0u, 3u, 10u}) {
    for (std::size_t iy : {0u, 7u, 32u}) {
      for (std::size_t ix : {0u, 16u, 32u}) {
        const double pt[3] = {f.x(ix), f.y(iy), f.times[k]};
        CHECK(f.interpolate(pt) == f.at(k, 0, iy, ix));
      }
    }
  }
  const double outside[3] = {1.5, 0.0, 0.1};
  CHECK_THROWS_AS(f.interpolate(outside), Error);
  const double late[3] = {0.0, 0.0, 2.0};
  CHECK_THROWS_AS(f.interpolate(late), Error);
  const double short_pt[2] = {0.0, 0.1};
  CHECK_THROWS_AS(f.interpolate(short_pt), Error);
}

TEST_CASE("interpolation of an analytic field is second order in space") {
  // f(x, y, t) = sin(x) cos(y) (1 + t), linear in t so time interpolation is exact
  auto make = [](std::size_t n) {
    GridField g;
    g.nx = n;
    g.ny = n;
    g.x0 = -1.0;
    g.x1 = 1.0;
    g.y0 = -1.0;
    g.y1 = 1.0;
    g.times = {0.0, 0.5, 1.0};
    g.values.resize(3 * n * n);
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t iy = 0; iy < n; ++iy)
        for (std::size_t ix = 0; ix < n; ++ix) g.at(k, 0, iy, ix) = std::sin(g.x(ix)) * std::cos(g.y(iy)) * (1.0 + g.times[k]);
    g.validate();
    return g;
  };
  auto max_err = [](const GridField& g) {
    SeededRng rng(9);
    double worst = 0.0;
    for (int i = 0; i < 2000; ++i) {
      const double pt[3] = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(0.0, 1.0)};
      worst = std::max(worst, std::abs(g.interpolate(pt) - std::sin(pt[0]) * std::cos(pt[1]) * (1.0 + pt[2])));
    }
    return worst;
  };
  const double coarse = max_err(make(17));
  const double fine = max_err(make(33));
  const double h = 2.0 / 16;
  CHECK(coarse <= h * h);
  CHECK(coarse / fine >= 3.0);
}

TEST_CASE("sample_spacetime: counts, domains and labels") {
  BurgersParams p = burgers_defaults(BurgersForm::two_d_scalar);
  p.grid = SpatialGrid{17, 17};
  p.t_end = 1.0;
  p.snapshots = 11;
  const GridField f = solve_burgers(p);
  SeededRng rng(3);
  const SpacetimeSample s = sample_spacetime(f, 400, 250, rng);
  s.interior.validate();
  s.boundary.validate();
  CHECK(s.interior.inputs.rows() == 400);
  CHECK(s.interior.inputs.cols() == 3);
  CHECK(s.boundary.inputs.rows() == 250);
  CHECK(s.conditions.ic_points.rows() == 50);
  CHECK(s.conditions.bc_points.rows() == 200);
  for (std::size_t i = 0; i < 400; ++i) {
    const double t = s.interior.inputs(i, 2);
    CHECK(t > 0.0);
    CHECK(t <= 1.0);
    CHECK(s.interior.labels(i, 0) == f.interpolate(s.interior.inputs.row(i)));
  }
  for (std::size_t i = 0; i < s.conditions.ic_points.rows(); ++i) CHECK(s.conditions.ic_points(i, 2) == 0.0);
  for (std::size_t i = 0; i < s.conditions.bc_points.rows(); ++i) {
    const auto row = s.conditions.bc_points.row(i);
    const bool on_face = std::abs(row[0]) == 1.0 || std::abs(row[1]) == 1.0;
    CHECK(on_face);
    CHECK(row[2] > 0.0);
    // Dirichlet faces of sin(pi x) sin(pi y) stay at their (near-zero) initial values
    CHECK(std::abs(s.conditions.bc_targets(i, 0)) <= 1e-15);
  }
  CHECK_THROWS_AS(sample_spacetime(f, 0, 10, rng), Error);
}

TEST_CASE("sample_spacetime: a single node-aligned draw reproduces the node value") {
  GridField g;
  g.nx = 3;
  g.x0 = -1.0;
  g.x1 = 1.0;
  g.times = {0.0, 1.0};
  g.values = {0.0, 1.0, 2.0, 3.0, 4.0, 5.0};
  SeededRng rng(1);
  const SpacetimeSample s = sample_spacetime(g, 1, 3, rng);
  const double x = s.interior.inputs(0, 0);
  const double t = s.interior.inputs(0, 1);
  CHECK(s.interior.labels(0, 0) == doctest::Approx((x + 1.0) + 3.0 * t).epsilon(1e-14));
  const double node[2] = {0.0, 1.0};
  CHECK(g.interpolate(node) == 4.0);
  CHECK(s.conditions.ic_points.rows() == 1);
  CHECK(s.conditions.bc_points.rows() == 2);
}

TEST_CASE("sample_spacetime is deterministic under a fixed seed") {
  const GridField f = solve_allen_cahn(allen_cahn_defaults());
  SeededRng a(77);
  SeededRng b(77);
  const auto s = sample_spacetime(f, 100, 60, a);
  const auto t = sample_spacetime(f, 100, 60, b);
  CHECK(std::ranges::equal(s.interior.inputs.values(), t.interior.inputs.values()));
  CHECK(std::ranges::equal(s.boundary.labels.values(), t.boundary.labels.values()));
}
