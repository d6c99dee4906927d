#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dnr/matrix.hpp"
#include "dnr/rng.hpp"

namespace dnr {

inline constexpr double kDefaultMargin = 0.9;

/// Per-output affine map scaled = scale * (y - offset).
struct ScalingRecord {
  std::vector<double> scale;
  std::vector<double> offset;
  double margin = 1.0;

  static ScalingRecord identity(std::size_t outputs);
  bool is_identity() const;
  Matrix apply(const Matrix& labels) const;
  Matrix invert(const Matrix& scaled) const;
};

/// scaled = margin * (y - center) / halfrange per output column. A constant
/// column maps to 0 with scale 1.
std::pair<Matrix, ScalingRecord> scale_labels(const Matrix& labels, double margin = kDefaultMargin);

struct Dataset {
  Matrix inputs;
  Matrix labels;  // scaled when `scaling` is not the identity
  ScalingRecord scaling;
  std::string provenance;

  void validate() const;
  /// Labels in physical units.
  Matrix raw_labels() const { return scaling.invert(labels); }
};

/// Returns a copy with labels scaled into (-margin, margin).
Dataset with_scaled_labels(const Dataset& d, double margin = kDefaultMargin);

/// Continuous piecewise-linear function on [breakpoints.front(), breakpoints.back()].
struct PiecewiseSpec {
  std::string name;
  std::vector<double> breakpoints;
  std::vector<double> slopes;  // one per segment
  double start_value = 0.0;    // value at the first breakpoint
  bool symmetric = false;      // even about the domain centre

  void validate() const;
  /// Linear extension past either end.
  double operator()(double x) const;
  std::size_t distinct_slopes() const;
  /// Distinct slopes, counting a mirror pair (a, -a) once.
  std::size_t asymmetric_features() const;
};

PiecewiseSpec symmetric8_spec();
PiecewiseSpec asymmetric9_spec();
PiecewiseSpec uat3_spec();
PiecewiseSpec uat6_spec();
/// Looks up the named canonical specs above.
PiecewiseSpec piecewise_by_name(std::string_view name);

/// Unscaled labels; x uniform on [breakpoints.front(), breakpoints.back()].
Dataset gen_piecewise(const PiecewiseSpec& spec, std::size_t n, SeededRng& rng);

enum class ParabolaKind { x, x2, five_x, five_x2, shifted };

std::string_view to_string(ParabolaKind k);
ParabolaKind parse_parabola_kind(std::string_view name);
double parabola_value(ParabolaKind k, double x);

inline constexpr std::size_t kDefaultParabolaSamples = 500;

/// Unscaled labels; x uniform on [lo, hi].
Dataset gen_parabola_family(ParabolaKind kind, double lo, double hi, std::size_t n, SeededRng& rng);

/// Row-wise concatenation; provenance joined with '+'.
Dataset concat(const Dataset& a, const Dataset& b);

}  // namespace dnr
