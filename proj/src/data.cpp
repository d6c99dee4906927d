#include "dnr/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "dnr/error.hpp"

namespace dnr {

ScalingRecord ScalingRecord::identity(std::size_t outputs) {
  return ScalingRecord{std::vector<double>(outputs, 1.0), std::vector<double>(outputs, 0.0), 1.0};
}

bool ScalingRecord::is_identity() const {
  for (std::size_t o = 0; o < scale.size(); ++o)
    if (scale[o] != 1.0 || offset[o] != 0.0) return false;
  return true;
}

Matrix ScalingRecord::apply(const Matrix& labels) const {
  if (labels.cols() != scale.size()) {
    throw Error(ErrorCode::dimension_mismatch, "scaling has " + std::to_string(scale.size()) +
                                                   " outputs, labels are " + labels.shape());
  }
  Matrix out = labels;
  for (std::size_t s = 0; s < out.rows(); ++s)
    for (std::size_t o = 0; o < out.cols(); ++o) out(s, o) = scale[o] * (out(s, o) - offset[o]);
  return out;
}

Matrix ScalingRecord::invert(const Matrix& scaled) const {
  if (scaled.cols() != scale.size()) {
    throw Error(ErrorCode::dimension_mismatch, "scaling has " + std::to_string(scale.size()) +
                                                   " outputs, values are " + scaled.shape());
  }
  Matrix out = scaled;
  for (std::size_t s = 0; s < out.rows(); ++s)
    for (std::size_t o = 0; o < out.cols(); ++o) out(s, o) = out(s, o) / scale[o] + offset[o];
  return out;
}

std::pair<Matrix, ScalingRecord> scale_labels(const Matrix& labels, double margin) {
  if (!(margin > 0.0 && margin <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, "scaling margin must be in (0, 1], got " + std::to_string(margin));
  }
  if (!labels.all_finite()) throw Error(ErrorCode::non_finite, "cannot scale non-finite labels");
  ScalingRecord rec;
  rec.margin = margin;
  for (std::size_t o = 0; o < labels.cols(); ++o) {
    double lo = labels.rows() ? labels(0, o) : 0.0;
    double hi = lo;
    for (std::size_t s = 0; s < labels.rows(); ++s) {
      lo = std::min(lo, labels(s, o));
      hi = std::max(hi, labels(s, o));
    }
    const double half = 0.5 * (hi - lo);
    const double center = 0.5 * (hi + lo);
    rec.offset.push_back(center);
    rec.scale.push_back(half > 0.0 ? margin / half : 1.0);
  }
  return {rec.apply(labels), rec};
}

void Dataset::validate() const {
  if (inputs.rows() == 0) throw Error(ErrorCode::invalid_argument, "dataset is empty");
  if (inputs.rows() != labels.rows()) {
    throw Error(ErrorCode::dimension_mismatch, "dataset inputs " + inputs.shape() + " vs labels " + labels.shape());
  }
  if (scaling.scale.size() != labels.cols() || scaling.offset.size() != labels.cols()) {
    throw Error(ErrorCode::dimension_mismatch, "dataset scaling does not match its label width");
  }
  if (!inputs.all_finite() || !labels.all_finite()) throw Error(ErrorCode::non_finite, "dataset has non-finite values");
}

Dataset with_scaled_labels(const Dataset& d, double margin) {
  Dataset out = d;
  auto [scaled, rec] = scale_labels(d.raw_labels(), margin);
  out.labels = std::move(scaled);
  out.scaling = std::move(rec);
  return out;
}

void PiecewiseSpec::validate() const {
  if (breakpoints.size() < 2) throw Error(ErrorCode::invalid_argument, "piecewise spec needs >= 2 breakpoints");
  if (slopes.size() + 1 != breakpoints.size()) {
    throw Error(ErrorCode::invalid_argument, "piecewise spec has " + std::to_string(breakpoints.size()) +
                                                 " breakpoints but " + std::to_string(slopes.size()) + " slopes");
  }
  for (std::size_t i = 1; i < breakpoints.size(); ++i) {
    if (!(breakpoints[i] > breakpoints[i - 1])) {
      throw Error(ErrorCode::invalid_argument, "piecewise breakpoints must be strictly increasing (index " +
                                                   std::to_string(i) + ")");
    }
  }
  for (double s : slopes)
    if (!std::isfinite(s)) throw Error(ErrorCode::non_finite, "piecewise slope is not finite");
  if (symmetric) {
    const std::size_t n = slopes.size();
    const double mid = 0.5 * (breakpoints.front() + breakpoints.back());
    for (std::size_t k = 0; k < n; ++k) {
      const bool mirrored = std::abs(slopes[k] + slopes[n - 1 - k]) <= 1e-12 &&
                            std::abs((breakpoints[k] - mid) + (breakpoints[n - k] - mid)) <= 1e-12;
      if (!mirrored) throw Error(ErrorCode::invalid_argument, "piecewise spec flagged symmetric is not even");
    }
  }
}

double PiecewiseSpec::operator()(double x) const {
  double y = start_value;
  const std::size_t n = slopes.size();
  if (x <= breakpoints.front()) return y + slopes.front() * (x - breakpoints.front());
  for (std::size_t k = 0; k < n; ++k) {
    const double right = breakpoints[k + 1];
    if (x <= right || k + 1 == n) return y + slopes[k] * (x - breakpoints[k]);
    y += slopes[k] * (right - breakpoints[k]);
  }
  return y;
}

std::size_t PiecewiseSpec::distinct_slopes() const {
  return std::set<double>(slopes.begin(), slopes.end()).size();
}

std::size_t PiecewiseSpec::asymmetric_features() const {
  const std::set<double> s(slopes.begin(), slopes.end());
  std::size_t pairs = 0;
  for (double v : s)
    if (v > 0.0 && s.count(-v)) ++pairs;
  return s.size() - pairs;
}

namespace {

std::vector<double> even_breakpoints(double lo, double hi, std::size_t segments) {
  std::vector<double> b(segments + 1);
  for (std::size_t i = 0; i <= segments; ++i) {
    b[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(segments);
  }
  b.back() = hi;
  return b;
}

}  // namespace

PiecewiseSpec symmetric8_spec() {
  // four slope magnitudes, each used once on either side of x = 0
  PiecewiseSpec s;
  s.name = "symmetric8";
  s.breakpoints = even_breakpoints(-1.0, 1.0, 8);
  s.slopes = {-3.0, 1.0, -2.0, 0.5, -0.5, 2.0, -1.0, 3.0};
  s.start_value = 0.0;
  s.symmetric = true;
  return s;
}

PiecewiseSpec asymmetric9_spec() {
  // nine distinct slope magnitudes, none mirrored
  PiecewiseSpec s;
  s.name = "asymmetric9";
  s.breakpoints = even_breakpoints(-1.0, 1.0, 9);
  s.slopes = {2.0, -1.0, 3.0, -2.5, 1.5, -3.5, 0.5, -4.0, 4.5};
  return s;
}

PiecewiseSpec uat3_spec() {
  PiecewiseSpec s;
  s.name = "uat3";
  s.breakpoints = {-1.0, -1.0 / 3.0, 1.0 / 3.0, 1.0};
  s.slopes = {3.0, -1.5, 0.75};
  return s;
}

PiecewiseSpec uat6_spec() {
  PiecewiseSpec s;
  s.name = "uat6";
  s.breakpoints = even_breakpoints(-1.0, 1.0, 6);
  s.slopes = {3.0, -1.0, 2.0, -3.0, 1.0, -2.0};
  return s;
}

PiecewiseSpec piecewise_by_name(std::string_view name) {
  for (auto make : {symmetric8_spec, asymmetric9_spec, uat3_spec, uat6_spec}) {
    PiecewiseSpec s = make();
    if (s.name == name) return s;
  }
  throw Error(ErrorCode::invalid_argument, "unknown piecewise dataset '" + std::string(name) + "'");
}

Dataset gen_piecewise(const PiecewiseSpec& spec, std::size_t n, SeededRng& rng) {
  spec.validate();
  if (n < spec.slopes.size()) {
    throw Error(ErrorCode::invalid_argument, "need at least one sample per segment (" +
                                                 std::to_string(spec.slopes.size()) + "), got " + std::to_string(n));
  }
  Dataset d;
  d.inputs = Matrix(n, 1);
  d.labels = Matrix(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.uniform(spec.breakpoints.front(), spec.breakpoints.back());
    d.inputs(i, 0) = x;
    d.labels(i, 0) = spec(x);
  }
  d.scaling = ScalingRecord::identity(1);
  d.provenance = "piecewise:" + spec.name + " n=" + std::to_string(n) + " seed=" + std::to_string(rng.seed()) +
                 " distinct_slopes=" + std::to_string(spec.distinct_slopes()) +
                 " asymmetric=" + std::to_string(spec.asymmetric_features());
  return d;
}

std::string_view to_string(ParabolaKind k) {
  switch (k) {
    case ParabolaKind::x: return "x";
    case ParabolaKind::x2: return "x2";
    case ParabolaKind::five_x: return "5x";
    case ParabolaKind::five_x2: return "5x2";
    case ParabolaKind::shifted: return "shifted";
  }
  return "unknown";
}

ParabolaKind parse_parabola_kind(std::string_view name) {
  for (ParabolaKind k : {ParabolaKind::x, ParabolaKind::x2, ParabolaKind::five_x, ParabolaKind::five_x2,
                         ParabolaKind::shifted}) {
    if (to_string(k) == name) return k;
  }
  throw Error(ErrorCode::invalid_argument, "unknown parabola kind '" + std::string(name) + "'");
}

double parabola_value(ParabolaKind k, double x) {
  switch (k) {
    case ParabolaKind::x: return x;
    case ParabolaKind::x2: return x * x;
    case ParabolaKind::five_x: return 5.0 * x;
    case ParabolaKind::five_x2: return 5.0 * x * x;
    case ParabolaKind::shifted: return 0.5 * x * x + 2.0 * x + 1.0;
  }
  return 0.0;
}

Dataset gen_parabola_family(ParabolaKind kind, double lo, double hi, std::size_t n, SeededRng& rng) {
  if (!(hi > lo)) throw Error(ErrorCode::invalid_argument, "parabola domain is empty");
  if (n < 2) throw Error(ErrorCode::invalid_argument, "parabola dataset needs at least 2 samples");
  Dataset d;
  d.inputs = Matrix(n, 1);
  d.labels = Matrix(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.uniform(lo, hi);
    d.inputs(i, 0) = x;
    d.labels(i, 0) = parabola_value(kind, x);
  }
  d.scaling = ScalingRecord::identity(1);
  char buf[128];
  std::snprintf(buf, sizeof buf, "parabola:%s lo=%g hi=%g n=%zu seed=%llu", std::string(to_string(kind)).c_str(),
                lo, hi, n, static_cast<unsigned long long>(rng.seed()));
  d.provenance = buf;
  return d;
}

Dataset concat(const Dataset& a, const Dataset& b) {
  if (a.inputs.cols() != b.inputs.cols() || a.labels.cols() != b.labels.cols()) {
    throw Error(ErrorCode::dimension_mismatch, "cannot concatenate datasets of different widths");
  }
  if (a.scaling.scale != b.scaling.scale || a.scaling.offset != b.scaling.offset) {
    throw Error(ErrorCode::invalid_argument, "cannot concatenate datasets with different scalings");
  }
  Dataset out;
  out.inputs = Matrix(a.inputs.rows() + b.inputs.rows(), a.inputs.cols());
  out.labels = Matrix(a.labels.rows() + b.labels.rows(), a.labels.cols());
  std::copy(a.inputs.values().begin(), a.inputs.values().end(), out.inputs.values().begin());
  std::copy(b.inputs.values().begin(), b.inputs.values().end(),
            out.inputs.values().begin() + static_cast<std::ptrdiff_t>(a.inputs.size()));
  std::copy(a.labels.values().begin(), a.labels.values().end(), out.labels.values().begin());
  std::copy(b.labels.values().begin(), b.labels.values().end(),
            out.labels.values().begin() + static_cast<std::ptrdiff_t>(a.labels.size()));
  out.scaling = a.scaling;
  out.provenance = a.provenance + "+" + b.provenance;
  return out;
}

}  // namespace dnr
