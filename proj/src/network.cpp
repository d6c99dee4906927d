#include "dnr/network.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "dnr/error.hpp"

namespace dnr {

std::string_view to_string(Activation a) {
  return a == Activation::tanh ? "tanh" : "relu";
}

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  throw Error(ErrorCode::invalid_argument, "unknown activation '" + std::string(name) + "'");
}

void NetworkSpec::validate() const {
  if (input_dim < 1 || output_dim < 1 || width < 1 || depth < 1) {
    throw Error(ErrorCode::invalid_argument,
                "network spec needs n, m, w, d >= 1 (got n=" + std::to_string(input_dim) +
                    " m=" + std::to_string(output_dim) + " w=" + std::to_string(width) +
                    " d=" + std::to_string(depth) + ")");
  }
}

std::size_t param_count(const NetworkSpec& spec) {
  spec.validate();
  const std::size_t w = spec.width;
  return spec.input_dim * w + w + (spec.depth - 1) * (w * w + w) + w * spec.output_dim;
}

Parameters Parameters::zeros(const NetworkSpec& spec) {
  spec.validate();
  Parameters p;
  for (std::size_t l = 0; l < spec.depth; ++l) {
    const std::size_t fan_in = l == 0 ? spec.input_dim : spec.width;
    p.hidden.push_back({Matrix(spec.width, fan_in), std::vector<double>(spec.width, 0.0)});
  }
  p.output = Matrix(spec.output_dim, spec.width);
  return p;
}

std::vector<ParamBlock> Parameters::blocks() {
  std::vector<ParamBlock> out;
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    const std::string prefix = "hidden[" + std::to_string(l) + "]";
    out.push_back({prefix + ".weights", hidden[l].weights.values()});
    out.push_back({prefix + ".biases", hidden[l].biases});
  }
  out.push_back({"output.weights", output.values()});
  return out;
}

std::vector<ConstParamBlock> Parameters::blocks() const {
  std::vector<ConstParamBlock> out;
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    const std::string prefix = "hidden[" + std::to_string(l) + "]";
    out.push_back({prefix + ".weights", hidden[l].weights.values()});
    out.push_back({prefix + ".biases", hidden[l].biases});
  }
  out.push_back({"output.weights", output.values()});
  return out;
}

std::size_t Parameters::count() const {
  std::size_t n = output.size();
  for (const auto& layer : hidden) n += layer.weights.size() + layer.biases.size();
  return n;
}

std::vector<double> Parameters::flatten() const {
  std::vector<double> flat;
  flat.reserve(count());
  for (const auto& block : blocks()) flat.insert(flat.end(), block.values.begin(), block.values.end());
  return flat;
}

void Parameters::assign(std::span<const double> flat) {
  if (flat.size() != count()) {
    throw Error(ErrorCode::dimension_mismatch, "assigning " + std::to_string(flat.size()) +
                                                   " values to " + std::to_string(count()) +
                                                   " parameters");
  }
  std::size_t offset = 0;
  for (auto& block : blocks()) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), block.values.size(),
                block.values.begin());
    offset += block.values.size();
  }
}

void add_scaled(Parameters& into, const Parameters& other, double scale) {
  auto dst = into.blocks();
  const auto src = other.blocks();
  if (dst.size() != src.size()) throw Error(ErrorCode::dimension_mismatch, "parameter layouts differ");
  for (std::size_t b = 0; b < dst.size(); ++b) {
    if (dst[b].values.size() != src[b].values.size()) {
      throw Error(ErrorCode::dimension_mismatch, "parameter block " + dst[b].name + " differs");
    }
    for (std::size_t i = 0; i < dst[b].values.size(); ++i) dst[b].values[i] += scale * src[b].values[i];
  }
}

Network init_network(const NetworkSpec& spec, SeededRng& rng) {
  Network net{spec, Parameters::zeros(spec)};
  for (auto& layer : net.params.hidden) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.weights.rows() + layer.weights.cols()));
    for (double& v : layer.weights.values()) v = rng.uniform(-limit, limit);
  }
  const double limit = std::sqrt(6.0 / static_cast<double>(spec.width + spec.output_dim));
  for (double& v : net.params.output.values()) v = rng.uniform(-limit, limit);
  return net;
}

Network zero_network(const NetworkSpec& spec) { return Network{spec, Parameters::zeros(spec)}; }

std::uint64_t fingerprint(const Network& net) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xFF;
      h *= 0x100000001B3ULL;
    }
  };
  mix(net.spec.input_dim);
  mix(net.spec.output_dim);
  mix(net.spec.width);
  mix(net.spec.depth);
  mix(static_cast<std::uint64_t>(net.spec.activation));
  for (const auto& block : net.params.blocks()) {
    for (double v : block.values) mix(std::bit_cast<std::uint64_t>(v));
  }
  return h;
}

namespace {

void check_inputs(const Network& net, const Matrix& inputs) {
  if (inputs.cols() != net.spec.input_dim) {
    throw Error(ErrorCode::dimension_mismatch, "network expects " + std::to_string(net.spec.input_dim) +
                                                   " input columns, got " + inputs.shape());
  }
}

double activate(Activation a, double z) {
  return a == Activation::tanh ? std::tanh(z) : (z > 0.0 ? z : 0.0);
}

// z = a * W^T + b (b optional), rows of a are samples.
void affine(const Matrix& a, const Matrix& weights, const std::vector<double>* biases, Matrix& z) {
  const std::size_t n = a.rows();
  const std::size_t out = weights.rows();
  const std::size_t in = weights.cols();
  z = Matrix(n, out);
  for (std::size_t s = 0; s < n; ++s) {
    auto a_row = a.row(s);
    auto z_row = z.row(s);
    for (std::size_t o = 0; o < out; ++o) {
      auto w_row = weights.row(o);
      double acc = biases ? (*biases)[o] : 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += w_row[i] * a_row[i];
      z_row[o] = acc;
    }
  }
}

// grad_w += dz^T a ; grad_b += colsum(dz) ; returns dz * W when wanted.
void affine_adjoint(const Matrix& dz, const Matrix& a, const Matrix& weights, Matrix& grad_w,
                    std::vector<double>* grad_b, Matrix* da) {
  const std::size_t n = dz.rows();
  const std::size_t out = weights.rows();
  const std::size_t in = weights.cols();
  for (std::size_t s = 0; s < n; ++s) {
    auto dz_row = dz.row(s);
    auto a_row = a.row(s);
    for (std::size_t o = 0; o < out; ++o) {
      const double g = dz_row[o];
      if (g == 0.0) continue;
      auto gw_row = grad_w.row(o);
      for (std::size_t i = 0; i < in; ++i) gw_row[i] += g * a_row[i];
      if (grad_b) (*grad_b)[o] += g;
    }
  }
  if (da) {
    *da = Matrix(n, in);
    for (std::size_t s = 0; s < n; ++s) {
      auto dz_row = dz.row(s);
      auto da_row = da->row(s);
      for (std::size_t o = 0; o < out; ++o) {
        const double g = dz_row[o];
        if (g == 0.0) continue;
        auto w_row = weights.row(o);
        for (std::size_t i = 0; i < in; ++i) da_row[i] += g * w_row[i];
      }
    }
  }
}

}  // namespace

ForwardResult forward(const Network& net, const Matrix& inputs) {
  check_inputs(net, inputs);
  ForwardResult result;
  LayerTrace& trace = result.trace;
  trace.input = inputs;
  trace.net_fingerprint = fingerprint(net);
  const Matrix* a = &trace.input;
  for (const auto& layer : net.params.hidden) {
    Matrix z;
    affine(*a, layer.weights, &layer.biases, z);
    Matrix post = z;
    for (double& v : post.values()) v = activate(net.spec.activation, v);
    trace.pre.push_back(std::move(z));
    trace.post.push_back(std::move(post));
    a = &trace.post.back();
  }
  affine(*a, net.params.output, nullptr, result.outputs);
  return result;
}

Matrix predict(const Network& net, const Matrix& inputs) {
  check_inputs(net, inputs);
  Matrix a = inputs;
  Matrix z;
  for (const auto& layer : net.params.hidden) {
    affine(a, layer.weights, &layer.biases, z);
    for (double& v : z.values()) v = activate(net.spec.activation, v);
    std::swap(a, z);
  }
  affine(a, net.params.output, nullptr, z);
  return z;
}

Matrix layer1_features(const Network& net, const Matrix& inputs) {
  check_inputs(net, inputs);
  Matrix z;
  affine(inputs, net.params.hidden.front().weights, &net.params.hidden.front().biases, z);
  for (double& v : z.values()) v = activate(net.spec.activation, v);
  return z;
}

Parameters backprop(const Network& net, const LayerTrace& trace, const Matrix& output_grad,
                    const Matrix* layer1_grad) {
  const std::size_t n = trace.input.rows();
  if (trace.net_fingerprint != fingerprint(net) || trace.post.size() != net.spec.depth) {
    throw Error(ErrorCode::stale_trace, "trace was not produced by this network's current parameters");
  }
  if (output_grad.rows() != n || output_grad.cols() != net.spec.output_dim) {
    throw Error(ErrorCode::dimension_mismatch,
                "output gradient " + output_grad.shape() + " for batch of " + std::to_string(n));
  }
  if (layer1_grad && (layer1_grad->rows() != n || layer1_grad->cols() != net.spec.width)) {
    throw Error(ErrorCode::dimension_mismatch, "layer-1 gradient " + layer1_grad->shape());
  }

  Parameters grad = Parameters::zeros(net.spec);
  Matrix da;
  affine_adjoint(output_grad, trace.post.back(), net.params.output, grad.output, nullptr, &da);
  for (std::size_t l = net.spec.depth; l-- > 0;) {
    if (l == 0 && layer1_grad) {
      auto dst = da.values();
      auto src = layer1_grad->values();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
    Matrix& dz = da;  // reuse storage
    const auto pre = trace.pre[l].values();
    const auto post = trace.post[l].values();
    auto g = dz.values();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (net.spec.activation == Activation::tanh) {
        g[i] *= 1.0 - post[i] * post[i];
      } else {
        g[i] = pre[i] > 0.0 ? g[i] : 0.0;
      }
    }
    const Matrix& a_prev = l == 0 ? trace.input : trace.post[l - 1];
    Matrix next;
    affine_adjoint(dz, a_prev, net.params.hidden[l].weights, grad.hidden[l].weights,
                   &grad.hidden[l].biases, l == 0 ? nullptr : &next);
    da = std::move(next);
  }
  return grad;
}

std::vector<double> input_gradient(const Network& net, std::span<const double> point,
                                   std::size_t output_index) {
  Matrix x(1, point.size(), std::vector<double>(point.begin(), point.end()));
  check_inputs(net, x);
  auto fwd = forward(net, x);
  Matrix dy(1, net.spec.output_dim);
  dy(0, output_index) = 1.0;
  Matrix da;
  Matrix scratch(net.spec.output_dim, net.spec.width);
  affine_adjoint(dy, fwd.trace.post.back(), net.params.output, scratch, nullptr, &da);
  for (std::size_t l = net.spec.depth; l-- > 0;) {
    auto g = da.values();
    const auto pre = fwd.trace.pre[l].values();
    const auto post = fwd.trace.post[l].values();
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] *= net.spec.activation == Activation::tanh ? 1.0 - post[i] * post[i]
                                                       : (pre[i] > 0.0 ? 1.0 : 0.0);
    }
    Matrix gw(net.params.hidden[l].weights.rows(), net.params.hidden[l].weights.cols());
    Matrix next;
    affine_adjoint(da, l == 0 ? fwd.trace.input : fwd.trace.post[l - 1], net.params.hidden[l].weights,
                   gw, nullptr, &next);
    da = std::move(next);
  }
  return std::vector<double>(da.values().begin(), da.values().end());
}

namespace {

void check_jet_request(const Network& net, std::size_t axis, int order) {
  if (axis >= net.spec.input_dim) {
    throw Error(ErrorCode::out_of_domain, "jet axis " + std::to_string(axis) + " for " +
                                              std::to_string(net.spec.input_dim) + " inputs");
  }
  if (order < 0 || order > kMaxJetOrder) {
    throw Error(ErrorCode::order_mismatch, "jet order " + std::to_string(order) + " not in [0, " +
                                               std::to_string(kMaxJetOrder) + "]");
  }
  if (net.spec.activation == Activation::relu && order >= 2) {
    throw Error(ErrorCode::invalid_argument,
                "relu networks have no input derivatives beyond order 1 (requested order " +
                    std::to_string(order) + ")");
  }
}

}  // namespace

JetTrace forward_jets_batch(const Network& net, const Matrix& inputs, std::size_t axis, int order) {
  check_inputs(net, inputs);
  check_jet_request(net, axis, order);
  const std::size_t n = inputs.rows();
  const std::size_t w = net.spec.width;
  const auto coeffs = static_cast<std::size_t>(order + 1);
  const bool is_tanh = net.spec.activation == Activation::tanh;

  JetTrace tr;
  tr.axis = axis;
  tr.order = order;
  tr.net_fingerprint = fingerprint(net);
  tr.input.assign(coeffs, Matrix(n, net.spec.input_dim));
  tr.input[0] = inputs;
  if (order >= 1) {
    for (std::size_t s = 0; s < n; ++s) tr.input[1](s, axis) = 1.0;
  }

  std::array<double, kMaxJetOrder + 1> zc{};
  std::array<double, kMaxJetOrder + 1> tc{};
  std::array<double, kMaxJetOrder + 1> sc{};
  const std::vector<Matrix>* a = &tr.input;
  for (std::size_t l = 0; l < net.spec.depth; ++l) {
    const auto& layer = net.params.hidden[l];
    std::vector<Matrix> pre(coeffs);
    for (std::size_t c = 0; c < coeffs; ++c) {
      affine((*a)[c], layer.weights, c == 0 ? &layer.biases : nullptr, pre[c]);
    }
    std::vector<Matrix> post(coeffs, Matrix(n, w));
    std::vector<Matrix> sech2;
    if (is_tanh) sech2.assign(coeffs, Matrix(n, w));
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t j = 0; j < w; ++j) {
        if (is_tanh) {
          for (std::size_t c = 0; c < coeffs; ++c) zc[c] = pre[c](s, j);
          tanh_taylor(std::span<const double>(zc.data(), coeffs), std::span<double>(tc.data(), coeffs),
                      std::span<double>(sc.data(), coeffs));
          for (std::size_t c = 0; c < coeffs; ++c) {
            post[c](s, j) = tc[c];
            sech2[c](s, j) = sc[c];
          }
        } else {
          const bool on = pre[0](s, j) > 0.0;
          for (std::size_t c = 0; c < coeffs; ++c) post[c](s, j) = on ? pre[c](s, j) : 0.0;
        }
      }
    }
    tr.pre.push_back(std::move(pre));
    tr.post.push_back(std::move(post));
    tr.sech2.push_back(std::move(sech2));
    a = &tr.post.back();
  }
  tr.outputs.resize(coeffs);
  for (std::size_t c = 0; c < coeffs; ++c) affine((*a)[c], net.params.output, nullptr, tr.outputs[c]);
  return tr;
}

std::vector<Jet> forward_jets(const Network& net, std::span<const double> point, std::size_t axis,
                              int order) {
  Matrix x(1, point.size(), std::vector<double>(point.begin(), point.end()));
  const JetTrace tr = forward_jets_batch(net, x, axis, order);
  std::vector<Jet> out(net.spec.output_dim, Jet(order));
  for (std::size_t o = 0; o < net.spec.output_dim; ++o) {
    for (int c = 0; c <= order; ++c) out[o][c] = tr.outputs[static_cast<std::size_t>(c)](0, o);
  }
  return out;
}

Parameters backprop_jets(const Network& net, const JetTrace& trace,
                         std::span<const Matrix> output_coeff_grads) {
  if (trace.net_fingerprint != fingerprint(net)) {
    throw Error(ErrorCode::stale_trace, "jet trace was not produced by this network's current parameters");
  }
  const auto coeffs = static_cast<std::size_t>(trace.order + 1);
  if (output_coeff_grads.size() != coeffs) {
    throw Error(ErrorCode::dimension_mismatch, "expected " + std::to_string(coeffs) +
                                                   " coefficient gradients, got " +
                                                   std::to_string(output_coeff_grads.size()));
  }
  const std::size_t n = trace.input[0].rows();
  const std::size_t w = net.spec.width;
  const bool is_tanh = net.spec.activation == Activation::tanh;
  Parameters grad = Parameters::zeros(net.spec);

  std::vector<Matrix> da(coeffs);
  for (std::size_t c = 0; c < coeffs; ++c) {
    if (output_coeff_grads[c].rows() != n || output_coeff_grads[c].cols() != net.spec.output_dim) {
      throw Error(ErrorCode::dimension_mismatch, "coefficient gradient " + output_coeff_grads[c].shape());
    }
    affine_adjoint(output_coeff_grads[c], trace.post.back()[c], net.params.output, grad.output,
                   nullptr, &da[c]);
  }

  std::array<double, kMaxJetOrder + 1> zc{};
  std::array<double, kMaxJetOrder + 1> tc{};
  std::array<double, kMaxJetOrder + 1> sc{};
  std::array<double, kMaxJetOrder + 1> tb{};
  std::array<double, kMaxJetOrder + 1> zb{};
  for (std::size_t l = net.spec.depth; l-- > 0;) {
    const auto& pre = trace.pre[l];
    const auto& post = trace.post[l];
    std::vector<Matrix> dz(coeffs, Matrix(n, w));
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t j = 0; j < w; ++j) {
        if (is_tanh) {
          for (std::size_t c = 0; c < coeffs; ++c) {
            zc[c] = pre[c](s, j);
            tc[c] = post[c](s, j);
            sc[c] = trace.sech2[l][c](s, j);
            tb[c] = da[c](s, j);
          }
          tanh_taylor_adjoint(std::span<const double>(zc.data(), coeffs),
                              std::span<const double>(tc.data(), coeffs),
                              std::span<const double>(sc.data(), coeffs),
                              std::span<double>(tb.data(), coeffs), std::span<double>(zb.data(), coeffs));
          for (std::size_t c = 0; c < coeffs; ++c) dz[c](s, j) = zb[c];
        } else {
          const bool on = pre[0](s, j) > 0.0;
          for (std::size_t c = 0; c < coeffs; ++c) dz[c](s, j) = on ? da[c](s, j) : 0.0;
        }
      }
    }
    const std::vector<Matrix>& a_prev = l == 0 ? trace.input : trace.post[l - 1];
    for (std::size_t c = 0; c < coeffs; ++c) {
      affine_adjoint(dz[c], a_prev[c], net.params.hidden[l].weights, grad.hidden[l].weights,
                     c == 0 ? &grad.hidden[l].biases : nullptr, l == 0 ? nullptr : &da[c]);
    }
  }
  return grad;
}

}  // namespace dnr
