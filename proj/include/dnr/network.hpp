#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dnr/jet.hpp"
#include "dnr/matrix.hpp"
#include "dnr/rng.hpp"

namespace dnr {

enum class Activation { tanh, relu };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

/// Dense net with `depth` hidden layers of `width` neurons and a linear,
/// zero-bias output layer. Depth counts hidden layers only.
struct NetworkSpec {
  std::size_t input_dim = 1;
  std::size_t output_dim = 1;
  std::size_t width = 1;
  std::size_t depth = 1;
  Activation activation = Activation::tanh;

  void validate() const;
  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

std::size_t param_count(const NetworkSpec& spec);

struct DenseLayer {
  Matrix weights;  // fan_out x fan_in
  std::vector<double> biases;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// A named contiguous slice of the parameter vector.
struct ParamBlock {
  std::string name;
  std::span<double> values;
};

struct ConstParamBlock {
  std::string name;
  std::span<const double> values;
};

/// All trainable scalars of a network; also used as the gradient container.
struct Parameters {
  std::vector<DenseLayer> hidden;
  Matrix output;  // output_dim x width

  static Parameters zeros(const NetworkSpec& spec);

  /// Layer order: hidden[0].weights, hidden[0].biases, ..., output. Row-major.
  std::vector<ParamBlock> blocks();
  std::vector<ConstParamBlock> blocks() const;
  std::size_t count() const;

  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);

  friend bool operator==(const Parameters&, const Parameters&) = default;
};

struct Network {
  NetworkSpec spec;
  Parameters params;

  friend bool operator==(const Network&, const Network&) = default;
};

/// Glorot-uniform weights, zero biases.
Network init_network(const NetworkSpec& spec, SeededRng& rng);
Network zero_network(const NetworkSpec& spec);

/// Digest of spec + parameters; detects stale traces.
std::uint64_t fingerprint(const Network& net);

/// Per-layer activations of one batch. post[l] is the output of hidden layer
/// l + 1; its columns are the features of that layer.
struct LayerTrace {
  Matrix input;
  std::vector<Matrix> pre;
  std::vector<Matrix> post;
  std::uint64_t net_fingerprint = 0;
};

struct ForwardResult {
  Matrix outputs;
  LayerTrace trace;
};

ForwardResult forward(const Network& net, const Matrix& inputs);
/// Outputs only, no trace.
Matrix predict(const Network& net, const Matrix& inputs);
/// Layer-1 activations (N x width).
Matrix layer1_features(const Network& net, const Matrix& inputs);

/// Parameter gradients of a scalar loss given dLoss/dOutputs. An optional
/// dLoss/dLayer1 (N x width) is added at the first hidden layer.
Parameters backprop(const Network& net, const LayerTrace& trace, const Matrix& output_grad,
                    const Matrix* layer1_grad = nullptr);

/// Reverse-mode gradient of output `output_index` w.r.t. the input point.
std::vector<double> input_gradient(const Network& net, std::span<const double> point,
                                   std::size_t output_index);

/// Taylor coefficients of every output along input axis `axis` at `point`.
std::vector<Jet> forward_jets(const Network& net, std::span<const double> point, std::size_t axis,
                              int order);

/// Batched jets over N points, kept for the reverse sweep.
struct JetTrace {
  std::size_t axis = 0;
  int order = 0;
  /// coeff[c] of each hidden layer's pre/post activations, N x width.
  std::vector<std::vector<Matrix>> pre;
  std::vector<std::vector<Matrix>> post;
  /// 1 - tanh^2 coefficients (tanh nets only).
  std::vector<std::vector<Matrix>> sech2;
  std::vector<Matrix> input;
  /// outputs[c] is N x output_dim.
  std::vector<Matrix> outputs;
  std::uint64_t net_fingerprint = 0;
};

JetTrace forward_jets_batch(const Network& net, const Matrix& inputs, std::size_t axis, int order);

/// Parameter gradients given dLoss/d(outputs[c]) for every coefficient c.
Parameters backprop_jets(const Network& net, const JetTrace& trace,
                         std::span<const Matrix> output_coeff_grads);

void add_scaled(Parameters& into, const Parameters& other, double scale = 1.0);

}  // namespace dnr
