#include "dnr/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "dnr/error.hpp"
#include "dnr/svd.hpp"

namespace dnr {

namespace {

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

}  // namespace

CollapseReport analyze_features(const Matrix& features, const CollapseTolerances& tol) {
  if (features.rows() == 0 || features.cols() == 0) {
    throw Error(ErrorCode::invalid_argument, "collapse analysis needs a non-empty feature matrix, got " +
                                                 features.shape());
  }
  const std::size_t n = features.rows();
  const std::size_t w = features.cols();

  // Zero columns stay zero, so dead units group together.
  Matrix unit = features;
  for (std::size_t c = 0; c < w; ++c) {
    double norm = 0.0;
    for (std::size_t s = 0; s < n; ++s) norm += unit(s, c) * unit(s, c);
    norm = std::sqrt(norm);
    if (norm > 0.0)
      for (std::size_t s = 0; s < n; ++s) unit(s, c) /= norm;
  }

  CollapseReport report;
  report.distances = Matrix(w, w);
  std::vector<std::size_t> parent(w);
  std::iota(parent.begin(), parent.end(), 0);
  for (std::size_t i = 0; i < w; ++i) {
    for (std::size_t j = i + 1; j < w; ++j) {
      double d = 0.0;
      for (std::size_t s = 0; s < n; ++s) d += (unit(s, i) - unit(s, j)) * (unit(s, i) - unit(s, j));
      d = std::sqrt(d);
      report.distances(i, j) = d;
      report.distances(j, i) = d;
      if (d < tol.duplicate) parent[find_root(parent, i)] = find_root(parent, j);
    }
  }

  std::vector<std::vector<std::size_t>> by_root(w);
  for (std::size_t i = 0; i < w; ++i) by_root[find_root(parent, i)].push_back(i);
  for (auto& g : by_root)
    if (!g.empty()) report.duplicate_groups.push_back(std::move(g));
  std::sort(report.duplicate_groups.begin(), report.duplicate_groups.end());

  report.singular_values = svd_singular_values(features);
  const double top = report.singular_values.empty() ? 0.0 : report.singular_values.front();
  for (double s : report.singular_values)
    if (top > 0.0 && s > tol.rank_relative * top) ++report.effective_rank;
  return report;
}

CollapseReport analyze_collapse(const Network& net, const Matrix& inputs, const CollapseTolerances& tol) {
  if (inputs.rows() == 0) throw Error(ErrorCode::invalid_argument, "collapse analysis needs input samples");
  return analyze_features(layer1_features(net, inputs), tol);
}

std::size_t suggest_width(const CollapseReport& report) { return std::max<std::size_t>(1, report.effective_rank); }

namespace {

void check_coord(const ParamCoord& c, const NetworkSpec& spec) {
  const std::size_t depth = spec.depth;
  bool ok = c.layer <= depth;
  if (ok && c.layer == depth) {
    ok = !c.bias && c.row < spec.output_dim && c.col < spec.width;
  } else if (ok) {
    const std::size_t fan_in = c.layer == 0 ? spec.input_dim : spec.width;
    ok = c.row < spec.width && (c.bias || c.col < fan_in);
  }
  if (!ok) {
    throw Error(ErrorCode::out_of_domain, "parameter coordinate " + to_string(c, spec) +
                                              " does not exist in a " + std::to_string(spec.input_dim) + "-" +
                                              std::to_string(spec.width) + "x" + std::to_string(spec.depth) +
                                              "-" + std::to_string(spec.output_dim) + " network");
  }
}

bool consume(std::string_view& s, std::string_view prefix) {
  if (!s.starts_with(prefix)) return false;
  s.remove_prefix(prefix.size());
  return true;
}

bool read_index(std::string_view& s, std::size_t& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr == s.data()) return false;
  s.remove_prefix(static_cast<std::size_t>(ptr - s.data()));
  return true;
}

}  // namespace

ParamCoord parse_param_coord(std::string_view text, const NetworkSpec& spec) {
  std::string_view s = text;
  ParamCoord c;
  bool ok = false;
  if (consume(s, "output.weights(")) {
    c.layer = spec.depth;
    ok = read_index(s, c.row) && consume(s, ",") && read_index(s, c.col) && consume(s, ")");
  } else if (consume(s, "hidden[") && read_index(s, c.layer) && consume(s, "].")) {
    if (consume(s, "weights(")) {
      ok = read_index(s, c.row) && consume(s, ",") && read_index(s, c.col) && consume(s, ")");
    } else if (consume(s, "biases(")) {
      c.bias = true;
      ok = read_index(s, c.row) && consume(s, ")");
    }
    // hidden[depth] would alias the output layer
    ok = ok && c.layer < spec.depth;
  }
  if (!ok || !s.empty()) {
    throw Error(ErrorCode::invalid_argument, "cannot parse parameter coordinate '" + std::string(text) + "'");
  }
  check_coord(c, spec);
  return c;
}

std::string to_string(const ParamCoord& c, const NetworkSpec& spec) {
  const std::string rc = "(" + std::to_string(c.row) + (c.bias ? "" : "," + std::to_string(c.col)) + ")";
  if (c.layer == spec.depth && !c.bias) return "output.weights" + rc;
  return "hidden[" + std::to_string(c.layer) + "]." + (c.bias ? "biases" : "weights") + rc;
}

double& param_at(Network& net, const ParamCoord& c) {
  check_coord(c, net.spec);
  if (c.layer == net.spec.depth) return net.params.output(c.row, c.col);
  auto& layer = net.params.hidden[c.layer];
  return c.bias ? layer.biases[c.row] : layer.weights(c.row, c.col);
}

double param_at(const Network& net, const ParamCoord& c) {
  check_coord(c, net.spec);
  if (c.layer == net.spec.depth) return net.params.output(c.row, c.col);
  const auto& layer = net.params.hidden[c.layer];
  return c.bias ? layer.biases[c.row] : layer.weights(c.row, c.col);
}

double ScanAxis::value(std::size_t i) const {
  return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
}

SurfaceScan scan_surface(const Network& net, const LossClosure& loss, const ScanAxis& x, const ScanAxis& y) {
  if (x.points < 2 || y.points < 2) throw Error(ErrorCode::invalid_argument, "scan resolution must be >= 2 per axis");
  if (!(x.hi > x.lo) || !(y.hi > y.lo)) throw Error(ErrorCode::invalid_argument, "scan ranges must have hi > lo");
  if (x.coord == y.coord) throw Error(ErrorCode::invalid_argument, "scan axes must address different parameters");
  Network probe = net;
  double& px = param_at(probe, x.coord);
  double& py = param_at(probe, y.coord);
  SurfaceScan scan{x, y, Matrix(x.points, y.points)};
  for (std::size_t i = 0; i < x.points; ++i) {
    for (std::size_t j = 0; j < y.points; ++j) {
      px = x.value(i);
      py = y.value(j);
      const double v = loss(probe);
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::non_finite, "loss is not finite at scan node (" + std::to_string(i) + "," +
                                               std::to_string(j) + ")");
      }
      scan.values(i, j) = v;
    }
  }
  return scan;
}

double total_variation(const Matrix& grid) {
  double tv = 0.0;
  for (std::size_t i = 0; i < grid.rows(); ++i) {
    for (std::size_t j = 0; j < grid.cols(); ++j) {
      if (i + 1 < grid.rows()) tv += std::abs(grid(i + 1, j) - grid(i, j));
      if (j + 1 < grid.cols()) tv += std::abs(grid(i, j + 1) - grid(i, j));
    }
  }
  return tv;
}

}  // namespace dnr
