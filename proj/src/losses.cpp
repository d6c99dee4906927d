#include "dnr/losses.hpp"

#include <array>
#include <cmath>
#include <string>

#include "dnr/error.hpp"

namespace dnr {

namespace {

void check_same_shape(const Matrix& a, const Matrix& b, std::string_view what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::dimension_mismatch,
                std::string(what) + ": prediction " + a.shape() + " vs target " + b.shape());
  }
  if (a.empty()) throw Error(ErrorCode::invalid_argument, std::string(what) + " of an empty batch");
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

double mse(const Matrix& pred, const Matrix& truth) {
  check_same_shape(pred, truth, "mse");
  double acc = 0.0;
  const auto p = pred.values();
  const auto t = truth.values();
  for (std::size_t i = 0; i < p.size(); ++i) acc += (p[i] - t[i]) * (p[i] - t[i]);
  return acc / static_cast<double>(p.size());
}

double mae(const Matrix& pred, const Matrix& truth) {
  check_same_shape(pred, truth, "mae");
  double acc = 0.0;
  const auto p = pred.values();
  const auto t = truth.values();
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - t[i]);
  return acc / static_cast<double>(p.size());
}

double scaled_mse(const Matrix& pred, const Matrix& truth, double s) {
  if (!(s > 0.0)) throw Error(ErrorCode::invalid_argument, "scale factor must be positive, got " + std::to_string(s));
  return s * s * mse(pred, truth);
}

void SimilaritySpec::validate() const {
  if (!(sigma > 0.0)) throw Error(ErrorCode::invalid_argument, "similarity sigma must be > 0");
  if (!(weight >= 0.0)) throw Error(ErrorCode::invalid_argument, "similarity weight must be >= 0");
}

namespace {

// Sum over ordered pairs i != j of the column distance.
double pairwise_sum(const Matrix& f, DistanceKind kind) {
  const std::size_t n = f.rows();
  const std::size_t w = f.cols();
  double total = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    auto row = f.row(s);
    // direct differences so identical columns give exactly zero
    for (std::size_t i = 0; i < w; ++i) {
      for (std::size_t j = i + 1; j < w; ++j) {
        const double d = row[i] - row[j];
        total += 2.0 * (kind == DistanceKind::l2 ? d * d : std::abs(d));
      }
    }
  }
  return total;
}

}  // namespace

double similarity_loss(const Matrix& features, double sigma, DistanceKind kind) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::invalid_argument, "similarity sigma must be > 0");
  if (features.cols() < 2 || features.rows() == 0) return 0.0;
  const double n = static_cast<double>(features.rows());
  return std::exp(-pairwise_sum(features, kind) / (2.0 * n * sigma));
}

Matrix similarity_gradient(const Matrix& features, double sigma, DistanceKind kind) {
  Matrix grad(features.rows(), features.cols());
  if (features.cols() < 2 || features.rows() == 0) return grad;
  const double value = similarity_loss(features, sigma, kind);
  if (value == 0.0) return grad;
  const double factor = -value / (2.0 * static_cast<double>(features.rows()) * sigma);
  const std::size_t w = features.cols();
  for (std::size_t s = 0; s < features.rows(); ++s) {
    auto row = features.row(s);
    auto g = grad.row(s);
    if (kind == DistanceKind::l2) {
      double sum = 0.0;
      for (double v : row) sum += v;
      for (std::size_t i = 0; i < w; ++i) g[i] = factor * 4.0 * (static_cast<double>(w) * row[i] - sum);
    } else {
      for (std::size_t i = 0; i < w; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < w; ++j) acc += sign(row[i] - row[j]);
        g[i] = factor * 2.0 * acc;
      }
    }
  }
  return grad;
}

std::string_view to_string(FormId id) {
  switch (id) {
    case FormId::exact_parabola: return "exact_parabola";
    case FormId::ode1_parabola: return "ode1_parabola";
    case FormId::ode2_parabola: return "ode2_parabola";
    case FormId::pde1_parabola: return "pde1_parabola";
    case FormId::pde2_parabola: return "pde2_parabola";
    case FormId::burgers_1d: return "burgers_1d";
    case FormId::burgers_2d_scalar: return "burgers_2d_scalar";
    case FormId::burgers_2d_vector: return "burgers_2d_vector";
    case FormId::allen_cahn: return "allen_cahn";
  }
  return "unknown";
}

FormId parse_form(std::string_view name) {
  for (FormId id : {FormId::exact_parabola, FormId::ode1_parabola, FormId::ode2_parabola,
                    FormId::pde1_parabola, FormId::pde2_parabola, FormId::burgers_1d,
                    FormId::burgers_2d_scalar, FormId::burgers_2d_vector, FormId::allen_cahn}) {
    if (to_string(id) == name) return id;
  }
  throw Error(ErrorCode::invalid_argument, "unknown residual form '" + std::string(name) + "'");
}

std::size_t ResidualForm::input_dim() const {
  switch (id) {
    case FormId::exact_parabola:
    case FormId::ode1_parabola:
    case FormId::ode2_parabola: return 1;
    case FormId::pde1_parabola:
    case FormId::pde2_parabola:
    case FormId::burgers_1d:
    case FormId::allen_cahn: return 2;
    case FormId::burgers_2d_scalar:
    case FormId::burgers_2d_vector: return 3;
  }
  return 1;
}

std::size_t ResidualForm::output_dim() const { return id == FormId::burgers_2d_vector ? 2 : 1; }

int ResidualForm::axis_order(std::size_t axis) const {
  switch (id) {
    case FormId::exact_parabola: return 0;
    case FormId::ode1_parabola: return axis == 0 ? 1 : 0;
    case FormId::ode2_parabola: return axis == 0 ? 2 : 0;
    case FormId::pde1_parabola: return axis < 2 ? 1 : 0;
    case FormId::pde2_parabola:
    case FormId::burgers_1d:
    case FormId::allen_cahn: return axis == 0 ? 2 : (axis == 1 ? 1 : 0);
    case FormId::burgers_2d_scalar:
    case FormId::burgers_2d_vector: return axis < 2 ? 2 : (axis == 2 ? 1 : 0);
  }
  return 0;
}

int ResidualForm::max_order() const {
  int m = 0;
  for (std::size_t a = 0; a < input_dim(); ++a) m = std::max(m, axis_order(a));
  return m;
}

double parabola_1d(double x) { return 0.5 * x * x + 2.0 * x + 1.0; }
double parabola_2d(double x, double t) { return parabola_1d(x) + 0.5 * t * t + 2.0 * t; }

void ConditionSet::validate(const ResidualForm& form) const {
  if (interior.rows() == 0) throw Error(ErrorCode::invalid_argument, "condition set has no interior points");
  if (interior.cols() != form.input_dim()) {
    throw Error(ErrorCode::dimension_mismatch, std::string(to_string(form.id)) + " expects " +
                                                   std::to_string(form.input_dim()) +
                                                   " input columns, interior is " + interior.shape());
  }
  auto check_pair = [&](const Matrix& pts, const Matrix& tgt, const char* what) {
    if (pts.rows() != tgt.rows()) {
      throw Error(ErrorCode::dimension_mismatch, std::string(what) + " points " + pts.shape() +
                                                     " vs targets " + tgt.shape());
    }
    if (pts.rows() > 0 && (pts.cols() != form.input_dim() || tgt.cols() != form.output_dim())) {
      throw Error(ErrorCode::dimension_mismatch, std::string(what) + " samples have wrong width");
    }
  };
  check_pair(ic_points, ic_targets, "initial-condition");
  check_pair(bc_points, bc_targets, "boundary-condition");
  if (w_residual < 0 || w_ic < 0 || w_bc < 0) {
    throw Error(ErrorCode::invalid_argument, "condition weights must be >= 0");
  }
}

namespace {

constexpr std::size_t kMaxAxes = 3;

using Fields = FieldDerivatives;

// Residual values (N x E) and their adjoint map for one form.
struct FormKernel {
  const ResidualForm& form;
  const Matrix& x;
  const Fields& f;

  std::size_t equations() const { return form.output_dim(); }

  double phys(std::size_t s, std::size_t o) const {
    return f.u(s, o) / form.output_scale + form.output_offset;
  }

  double residual(std::size_t s, std::size_t e) const {
    const double sc = form.output_scale;
    switch (form.id) {
      case FormId::exact_parabola:
        return f.u(s, 0) - sc * (parabola_1d(x(s, 0)) - form.output_offset);
      case FormId::ode1_parabola:
        return f.d1[0](s, 0) - sc * (x(s, 0) + 2.0);
      case FormId::ode2_parabola:
        return f.d2[0](s, 0) - sc * 1.0;
      case FormId::pde1_parabola:
        return f.d1[0](s, 0) + f.d1[1](s, 0) - sc * (x(s, 0) + x(s, 1) + 4.0);
      case FormId::pde2_parabola:
        return f.d1[1](s, 0) - f.d2[0](s, 0) - sc * (x(s, 1) + 1.0);
      case FormId::burgers_1d:
        return f.d1[1](s, 0) + phys(s, 0) * f.d1[0](s, 0) - form.viscosity * f.d2[0](s, 0);
      case FormId::burgers_2d_scalar:
        return f.d1[2](s, 0) + phys(s, 0) * (f.d1[0](s, 0) + f.d1[1](s, 0)) -
               form.viscosity * (f.d2[0](s, 0) + f.d2[1](s, 0));
      case FormId::burgers_2d_vector:
        return f.d1[2](s, e) + phys(s, 0) * f.d1[0](s, e) + phys(s, 1) * f.d1[1](s, e) -
               form.viscosity * (f.d2[0](s, e) + f.d2[1](s, e));
      case FormId::allen_cahn: {
        const double u = phys(s, 0);
        return f.d1[1](s, 0) + sc * form.reaction * (u * u * u - u) - form.diffusion * f.d2[0](s, 0);
      }
    }
    return 0.0;
  }

  // Accumulates r_bar * dr/d(field) into the adjoint fields.
  void adjoint(std::size_t s, std::size_t e, double r_bar, Fields& g) const {
    const double sc = form.output_scale;
    switch (form.id) {
      case FormId::exact_parabola: g.u(s, 0) += r_bar; break;
      case FormId::ode1_parabola: g.d1[0](s, 0) += r_bar; break;
      case FormId::ode2_parabola: g.d2[0](s, 0) += r_bar; break;
      case FormId::pde1_parabola:
        g.d1[0](s, 0) += r_bar;
        g.d1[1](s, 0) += r_bar;
        break;
      case FormId::pde2_parabola:
        g.d1[1](s, 0) += r_bar;
        g.d2[0](s, 0) -= r_bar;
        break;
      case FormId::burgers_1d:
        g.d1[1](s, 0) += r_bar;
        g.d1[0](s, 0) += r_bar * phys(s, 0);
        g.u(s, 0) += r_bar * f.d1[0](s, 0) / sc;
        g.d2[0](s, 0) -= r_bar * form.viscosity;
        break;
      case FormId::burgers_2d_scalar:
        g.d1[2](s, 0) += r_bar;
        g.d1[0](s, 0) += r_bar * phys(s, 0);
        g.d1[1](s, 0) += r_bar * phys(s, 0);
        g.u(s, 0) += r_bar * (f.d1[0](s, 0) + f.d1[1](s, 0)) / sc;
        g.d2[0](s, 0) -= r_bar * form.viscosity;
        g.d2[1](s, 0) -= r_bar * form.viscosity;
        break;
      case FormId::burgers_2d_vector:
        g.d1[2](s, e) += r_bar;
        g.d1[0](s, e) += r_bar * phys(s, 0);
        g.d1[1](s, e) += r_bar * phys(s, 1);
        g.u(s, 0) += r_bar * f.d1[0](s, e) / sc;
        g.u(s, 1) += r_bar * f.d1[1](s, e) / sc;
        g.d2[0](s, e) -= r_bar * form.viscosity;
        g.d2[1](s, e) -= r_bar * form.viscosity;
        break;
      case FormId::allen_cahn: {
        const double u = phys(s, 0);
        g.d1[1](s, 0) += r_bar;
        g.u(s, 0) += r_bar * form.reaction * (3.0 * u * u - 1.0);
        g.d2[0](s, 0) -= r_bar * form.diffusion;
        break;
      }
    }
  }
};

// Mean squared mismatch of the scaled prediction against physical targets.
double condition_term(const ResidualForm& form, const Network& net, const Matrix& points,
                      const Matrix& targets, double weight, Parameters* grad) {
  if (points.rows() == 0) return 0.0;
  auto fwd = forward(net, points);
  const double count = static_cast<double>(targets.size());
  double acc = 0.0;
  Matrix g(fwd.outputs.rows(), fwd.outputs.cols());
  for (std::size_t s = 0; s < points.rows(); ++s) {
    for (std::size_t o = 0; o < targets.cols(); ++o) {
      const double diff = fwd.outputs(s, o) - form.output_scale * (targets(s, o) - form.output_offset);
      acc += diff * diff;
      g(s, o) = weight * 2.0 * diff / count;
    }
  }
  if (grad && weight > 0.0) add_scaled(*grad, backprop(net, fwd.trace, g));
  return acc / count;
}

}  // namespace

Matrix residual_pointwise(const ResidualForm& form, const Matrix& points, const FieldDerivatives& fields) {
  if (points.cols() != form.input_dim() || fields.u.rows() != points.rows()) {
    throw Error(ErrorCode::dimension_mismatch, "residual fields do not match " + points.shape());
  }
  FormKernel kernel{form, points, fields};
  Matrix r(points.rows(), kernel.equations());
  for (std::size_t s = 0; s < points.rows(); ++s)
    for (std::size_t e = 0; e < kernel.equations(); ++e) r(s, e) = kernel.residual(s, e);
  return r;
}

ResidualParts residual_eval(const ResidualForm& form, const Network& net,
                            const ConditionSet& conditions, Parameters* grad) {
  conditions.validate(form);
  if (net.spec.input_dim != form.input_dim() || net.spec.output_dim != form.output_dim()) {
    throw Error(ErrorCode::dimension_mismatch,
                std::string(to_string(form.id)) + " needs a network with " + std::to_string(form.input_dim()) +
                    " inputs and " + std::to_string(form.output_dim()) + " outputs");
  }
  if (form.max_order() > kMaxJetOrder) {
    throw Error(ErrorCode::order_mismatch, std::string(to_string(form.id)) + " needs derivative order " +
                                               std::to_string(form.max_order()));
  }
  if (net.spec.activation == Activation::relu && form.max_order() >= 2) {
    throw Error(ErrorCode::invalid_argument, std::string(to_string(form.id)) +
                                                 " needs second derivatives; relu networks cannot supply them");
  }
  if (!(form.output_scale > 0.0)) throw Error(ErrorCode::invalid_argument, "form output scale must be > 0");

  const Matrix& x = conditions.interior;
  const std::size_t n = x.rows();
  const std::size_t dims = form.input_dim();

  // Axis 0 always carries the value (order 0 at minimum).
  std::array<std::optional<JetTrace>, kMaxAxes> traces;
  for (std::size_t a = 0; a < dims; ++a) {
    const int order = form.axis_order(a);
    if (a == 0 || order > 0) traces[a] = forward_jets_batch(net, x, a, order);
  }
  Fields f;
  f.u = traces[0]->outputs[0];
  for (std::size_t a = 0; a < dims; ++a) {
    const int order = form.axis_order(a);
    if (order >= 1) f.d1[a] = traces[a]->outputs[1];
    if (order >= 2) {
      f.d2[a] = traces[a]->outputs[2];
      for (double& v : f.d2[a].values()) v *= 2.0;
    }
  }

  FormKernel kernel{form, x, f};
  const std::size_t eqs = kernel.equations();
  const double count = static_cast<double>(n * eqs);

  Fields g;
  if (grad) {
    g.u = Matrix(n, form.output_dim());
    for (std::size_t a = 0; a < dims; ++a) {
      g.d1[a] = Matrix(n, form.output_dim());
      g.d2[a] = Matrix(n, form.output_dim());
    }
  }

  ResidualParts parts;
  double acc = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t e = 0; e < eqs; ++e) {
      const double r = kernel.residual(s, e);
      acc += r * r;
      if (grad) kernel.adjoint(s, e, conditions.w_residual * 2.0 * r / count, g);
    }
  }
  parts.residual = acc / count;

  double ic_intermediate = 0.0;
  if (form.id == FormId::ode2_parabola) {
    // intermediate condition u_x = x + 2 on the interior points
    double q_acc = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      const double q = f.d1[0](s, 0) - form.output_scale * (x(s, 0) + 2.0);
      q_acc += q * q;
      if (grad) g.d1[0](s, 0) += conditions.w_ic * 2.0 * q / static_cast<double>(n);
    }
    ic_intermediate = q_acc / static_cast<double>(n);
  }

  if (grad) {
    for (std::size_t a = 0; a < dims; ++a) {
      if (!traces[a]) continue;
      const auto coeffs = static_cast<std::size_t>(traces[a]->order + 1);
      std::vector<Matrix> cg(coeffs, Matrix(n, form.output_dim()));
      if (a == 0) cg[0] = g.u;
      if (coeffs > 1) cg[1] = g.d1[a];
      if (coeffs > 2) {
        cg[2] = g.d2[a];
        for (double& v : cg[2].values()) v *= 2.0;
      }
      add_scaled(*grad, backprop_jets(net, *traces[a], cg));
    }
  }

  parts.ic = ic_intermediate + condition_term(form, net, conditions.ic_points, conditions.ic_targets,
                                              conditions.w_ic, grad);
  parts.bc = condition_term(form, net, conditions.bc_points, conditions.bc_targets, conditions.w_bc, grad);
  parts.total = conditions.w_residual * parts.residual + conditions.w_ic * parts.ic +
                conditions.w_bc * parts.bc;
  return parts;
}

std::string_view to_string(DataLoss d) { return d == DataLoss::mse ? "mse" : "mae"; }

void LossSpec::validate() const {
  if (data.has_value() == residual.has_value()) {
    throw Error(ErrorCode::invalid_argument,
                "loss needs exactly one of a data term or a residual term");
  }
  similarity.validate();
}

namespace {

LossEvaluation evaluate(const LossSpec& spec, const Network& net, const LossBatch& batch, bool with_grad) {
  spec.validate();
  LossEvaluation out;
  if (with_grad) out.gradient = Parameters::zeros(net.spec);
  LossValue& v = out.value;
  const bool sim = spec.similarity.enabled && spec.similarity.weight > 0.0;

  if (spec.data) {
    const auto* data = std::get_if<DataBatch>(&batch);
    if (!data) throw Error(ErrorCode::invalid_argument, "data-driven loss given a condition set");
    auto fwd = forward(net, data->inputs);
    check_same_shape(fwd.outputs, data->labels, to_string(*spec.data));
    v.main = *spec.data == DataLoss::mse ? mse(fwd.outputs, data->labels) : mae(fwd.outputs, data->labels);
    Matrix layer1_grad;
    if (sim) {
      v.similarity = similarity_loss(fwd.trace.post[0], spec.similarity.sigma, spec.similarity.distance);
      if (with_grad) {
        layer1_grad = similarity_gradient(fwd.trace.post[0], spec.similarity.sigma, spec.similarity.distance);
        for (double& g : layer1_grad.values()) g *= spec.similarity.weight;
      }
    }
    if (with_grad) {
      Matrix og(fwd.outputs.rows(), fwd.outputs.cols());
      const double count = static_cast<double>(og.size());
      const auto p = fwd.outputs.values();
      const auto t = data->labels.values();
      auto g = og.values();
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] = *spec.data == DataLoss::mse ? 2.0 * (p[i] - t[i]) / count : sign(p[i] - t[i]) / count;
      }
      out.gradient = backprop(net, fwd.trace, og, sim ? &layer1_grad : nullptr);
    }
  } else {
    const auto* cond = std::get_if<ConditionSet>(&batch);
    if (!cond) throw Error(ErrorCode::invalid_argument, "representation-driven loss given a data batch");
    const ResidualParts parts = residual_eval(*spec.residual, net, *cond, with_grad ? &out.gradient : nullptr);
    v.main = parts.total;
    v.residual = parts.residual;
    v.ic = parts.ic;
    v.bc = parts.bc;
    if (sim) {
      auto fwd = forward(net, cond->interior);
      v.similarity = similarity_loss(fwd.trace.post[0], spec.similarity.sigma, spec.similarity.distance);
      if (with_grad) {
        Matrix layer1_grad =
            similarity_gradient(fwd.trace.post[0], spec.similarity.sigma, spec.similarity.distance);
        for (double& g : layer1_grad.values()) g *= spec.similarity.weight;
        Matrix zero(fwd.outputs.rows(), fwd.outputs.cols());
        add_scaled(out.gradient, backprop(net, fwd.trace, zero, &layer1_grad));
      }
    }
  }
  v.total = v.main + (sim ? spec.similarity.weight * v.similarity : 0.0);
  return out;
}

}  // namespace

LossValue composite_loss(const LossSpec& spec, const Network& net, const LossBatch& batch) {
  return evaluate(spec, net, batch, false).value;
}

LossEvaluation composite_loss_with_gradient(const LossSpec& spec, const Network& net,
                                            const LossBatch& batch) {
  return evaluate(spec, net, batch, true);
}

}  // namespace dnr
