#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "dnr/matrix.hpp"
#include "dnr/network.hpp"

namespace dnr {

struct CollapseTolerances {
  double rank_relative = 1e-3;  // singular values above this fraction of the largest count
  double duplicate = 1e-2;      // distance between unit-normalized feature columns
};

struct CollapseReport {
  Matrix distances;  // w x w, symmetric, zero diagonal
  std::vector<double> singular_values;
  std::size_t effective_rank = 0;
  /// Partition of 0..w-1; singletons included. Sorted by smallest member.
  std::vector<std::vector<std::size_t>> duplicate_groups;
};

/// Redundancy check of the layer-1 features of `net` on `inputs`.
CollapseReport analyze_collapse(const Network& net, const Matrix& inputs,
                                const CollapseTolerances& tol = {});
CollapseReport analyze_features(const Matrix& features, const CollapseTolerances& tol = {});

/// Width that keeps every distinct feature. Never below 1.
std::size_t suggest_width(const CollapseReport& report);

/// Addresses one scalar parameter. `layer == depth` selects the output layer,
/// which has no biases.
struct ParamCoord {
  std::size_t layer = 0;
  bool bias = false;
  std::size_t row = 0;
  std::size_t col = 0;

  friend bool operator==(const ParamCoord&, const ParamCoord&) = default;
};

/// Accepts "hidden[L].weights(R,C)", "hidden[L].biases(R)", "output.weights(R,C)".
ParamCoord parse_param_coord(std::string_view text, const NetworkSpec& spec);
std::string to_string(const ParamCoord& c, const NetworkSpec& spec);

double& param_at(Network& net, const ParamCoord& c);
double param_at(const Network& net, const ParamCoord& c);

struct ScanAxis {
  ParamCoord coord;
  double lo = -1.0;
  double hi = 1.0;
  std::size_t points = 21;

  double value(std::size_t i) const;
};

struct SurfaceScan {
  ScanAxis x;
  ScanAxis y;
  Matrix values;  // x.points x y.points
};

using LossClosure = std::function<double(const Network&)>;

/// Loss over a 2-D grid of two parameters; every other parameter keeps its
/// value in `net`.
SurfaceScan scan_surface(const Network& net, const LossClosure& loss, const ScanAxis& x, const ScanAxis& y);

/// Sum of |difference| over horizontal and vertical grid edges.
double total_variation(const Matrix& grid);

}  // namespace dnr
