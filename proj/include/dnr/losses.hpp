#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>
#include <variant>

#include "dnr/matrix.hpp"
#include "dnr/network.hpp"

namespace dnr {

double mse(const Matrix& pred, const Matrix& truth);
double mae(const Matrix& pred, const Matrix& truth);
/// s^2 * mse; compares losses of problems whose labels differ by the factor s.
double scaled_mse(const Matrix& pred, const Matrix& truth, double s);

enum class DistanceKind { l2, l1 };

/// exp(-S / (2 N sigma)) with S the sum over ordered column pairs i != j of
/// the (squared l2 or plain l1) distance between layer-1 feature columns.
struct SimilaritySpec {
  bool enabled = false;
  double sigma = 0.01;
  double weight = 1.0;
  DistanceKind distance = DistanceKind::l2;

  void validate() const;
};

/// In (0, 1] mathematically; underflows to 0 for well-separated features.
/// Fewer than two columns give 0.
double similarity_loss(const Matrix& features, double sigma, DistanceKind kind = DistanceKind::l2);
/// d similarity_loss / d features (N x w).
Matrix similarity_gradient(const Matrix& features, double sigma, DistanceKind kind = DistanceKind::l2);

enum class FormId {
  exact_parabola,
  ode1_parabola,
  ode2_parabola,
  pde1_parabola,
  pde2_parabola,
  burgers_1d,
  burgers_2d_scalar,
  burgers_2d_vector,
  allen_cahn,
};

std::string_view to_string(FormId id);
FormId parse_form(std::string_view name);

/// A representation (exact, ODE or PDE form) the network output must satisfy.
///
/// The network predicts scaled values u_net = scale * (u - offset); residuals
/// are evaluated on the physical u and multiplied by `output_scale`, so they
/// are measured in the same units as a scaled-label data fit.
struct ResidualForm {
  FormId id = FormId::exact_parabola;
  double viscosity = 0.01;  // Burgers
  double diffusion = 1.0;   // Allen-Cahn u_xx coefficient
  double reaction = 5.0;    // Allen-Cahn 5u^3 - 5u
  double output_scale = 1.0;
  double output_offset = 0.0;

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  /// Highest derivative order needed along `axis`.
  int axis_order(std::size_t axis) const;
  int max_order() const;
};

/// Parabola family behind the exact/ODE/PDE forms:
/// f(x) = 0.5 x^2 + 2x + 1, g(x, t) = f(x) + 0.5 t^2 + 2t.
double parabola_1d(double x);
double parabola_2d(double x, double t);

/// Samples the residual is enforced on, plus initial/boundary targets given
/// in physical (unscaled) units.
struct ConditionSet {
  Matrix interior;
  Matrix ic_points;
  Matrix ic_targets;
  Matrix bc_points;
  Matrix bc_targets;
  double w_residual = 1.0;
  double w_ic = 1.0;
  double w_bc = 1.0;

  void validate(const ResidualForm& form) const;
};

/// Scaled output u and its per-axis first and second input derivatives,
/// each N x output_dim. Unused axes may be left empty.
struct FieldDerivatives {
  Matrix u;
  std::array<Matrix, 3> d1;
  std::array<Matrix, 3> d2;
};

/// Pointwise residuals (N x equations) of `form` for given field values.
/// Lets analytic fields stand in for a network.
Matrix residual_pointwise(const ResidualForm& form, const Matrix& points, const FieldDerivatives& fields);

struct ResidualParts {
  double total = 0.0;
  double residual = 0.0;
  double ic = 0.0;
  double bc = 0.0;
};

/// Residual, initial and boundary terms. When `grad` is non-null the
/// parameter gradient of `total` is accumulated into it.
ResidualParts residual_eval(const ResidualForm& form, const Network& net,
                            const ConditionSet& conditions, Parameters* grad = nullptr);

enum class DataLoss { mse, mae };

std::string_view to_string(DataLoss d);

/// Exactly one of `data` (data-driven) or `residual` (representation-driven).
struct LossSpec {
  std::optional<DataLoss> data;
  std::optional<ResidualForm> residual;
  SimilaritySpec similarity;

  void validate() const;
};

struct DataBatch {
  Matrix inputs;
  Matrix labels;
};

using LossBatch = std::variant<DataBatch, ConditionSet>;

struct LossValue {
  double total = 0.0;
  double main = 0.0;
  double similarity = 0.0;
  double residual = 0.0;
  double ic = 0.0;
  double bc = 0.0;
};

struct LossEvaluation {
  LossValue value;
  Parameters gradient;
};

/// main term + weight * similarity(layer-1 features of the batch).
LossValue composite_loss(const LossSpec& spec, const Network& net, const LossBatch& batch);
LossEvaluation composite_loss_with_gradient(const LossSpec& spec, const Network& net,
                                            const LossBatch& batch);

}  // namespace dnr
