#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "dnr/matrix.hpp"
#include "dnr/network.hpp"
#include "dnr/rng.hpp"

namespace dnr::testing {

inline Matrix random_matrix(std::size_t r, std::size_t c, SeededRng& rng, double lo = -1.0,
                            double hi = 1.0) {
  Matrix m(r, c);
  for (double& v : m.values()) v = rng.uniform(lo, hi);
  return m;
}

/// Init plus random biases so every parameter block is exercised.
inline Network random_network(const NetworkSpec& spec, SeededRng& rng) {
  Network net = init_network(spec, rng);
  for (auto& layer : net.params.hidden)
    for (double& b : layer.biases) b = rng.uniform(-0.5, 0.5);
  return net;
}

/// Central differences of `loss` with respect to every parameter.
inline std::vector<double> fd_gradient(const Network& net, const std::function<double(const Network&)>& loss,
                                       double h = 1e-6) {
  Network probe = net;
  std::vector<double> flat = net.params.flatten();
  std::vector<double> grad(flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double keep = flat[i];
    flat[i] = keep + h;
    probe.params.assign(flat);
    const double up = loss(probe);
    flat[i] = keep - h;
    probe.params.assign(flat);
    const double down = loss(probe);
    flat[i] = keep;
    grad[i] = (up - down) / (2 * h);
  }
  return grad;
}

/// ||a - b|| / ||b||, the usual vector gradient-check metric.
inline double rel_norm_err(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0;
  double norm = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    norm += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(norm), 1e-300);
}

}  // namespace dnr::testing
