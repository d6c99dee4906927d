#include "dnr/jet.hpp"

#include <cmath>
#include <string>

#include "dnr/error.hpp"

namespace dnr {

namespace {

void check_order(int order) {
  if (order < 0 || order > kMaxJetOrder) {
    throw Error(ErrorCode::order_mismatch, "jet order " + std::to_string(order) +
                                               " outside [0, " + std::to_string(kMaxJetOrder) + "]");
  }
}

void check_same(const Jet& a, const Jet& b) {
  if (a.order() != b.order()) {
    throw Error(ErrorCode::order_mismatch, "jets of order " + std::to_string(a.order()) + " and " +
                                               std::to_string(b.order()));
  }
}

}  // namespace

Jet::Jet(int order) : order_(order) { check_order(order); }

Jet::Jet(int order, std::initializer_list<double> coeffs) : order_(order) {
  check_order(order);
  if (coeffs.size() != static_cast<std::size_t>(order + 1)) {
    throw Error(ErrorCode::order_mismatch, "jet of order " + std::to_string(order) + " given " +
                                               std::to_string(coeffs.size()) + " coefficients");
  }
  std::size_t k = 0;
  for (double c : coeffs) coeffs_[k++] = c;
}

Jet Jet::variable(double x, int order) {
  Jet j(order);
  j[0] = x;
  if (order >= 1) j[1] = 1.0;
  return j;
}

Jet Jet::constant(double c, int order) {
  Jet j(order);
  j[0] = c;
  return j;
}

double Jet::derivative(int k) const { return factorial(k) * (*this)[k]; }

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

Jet operator+(const Jet& a, const Jet& b) {
  check_same(a, b);
  Jet out(a.order());
  for (int k = 0; k <= a.order(); ++k) out[k] = a[k] + b[k];
  return out;
}

Jet operator-(const Jet& a, const Jet& b) {
  check_same(a, b);
  Jet out(a.order());
  for (int k = 0; k <= a.order(); ++k) out[k] = a[k] - b[k];
  return out;
}

Jet operator*(double s, const Jet& a) {
  Jet out(a.order());
  for (int k = 0; k <= a.order(); ++k) out[k] = s * a[k];
  return out;
}

Jet jet_mul(const Jet& a, const Jet& b) {
  check_same(a, b);
  Jet out(a.order());
  for (int k = 0; k <= a.order(); ++k) {
    double sum = 0.0;
    for (int i = 0; i <= k; ++i) sum += a[i] * b[k - i];
    out[k] = sum;
  }
  return out;
}

void tanh_taylor(std::span<const double> z, std::span<double> t, std::span<double> s) {
  const std::size_t order = z.size() - 1;
  t[0] = std::tanh(z[0]);
  s[0] = 1.0 - t[0] * t[0];
  for (std::size_t k = 1; k <= order; ++k) {
    double acc = 0.0;
    for (std::size_t j = 1; j <= k; ++j) acc += static_cast<double>(j) * z[j] * s[k - j];
    t[k] = acc / static_cast<double>(k);
    double sq = 0.0;
    for (std::size_t i = 0; i <= k; ++i) sq += t[i] * t[k - i];
    s[k] = -sq;
  }
}

void tanh_taylor_adjoint(std::span<const double> z, std::span<const double> t,
                         std::span<const double> s, std::span<double> t_bar,
                         std::span<double> z_bar) {
  const std::size_t order = z.size() - 1;
  std::array<double, kMaxJetOrder + 1> s_bar{};
  for (std::size_t k = 0; k <= order; ++k) z_bar[k] = 0.0;
  for (std::size_t k = order; k >= 1; --k) {
    // s_k = -sum_i t_i t_{k-i}
    for (std::size_t m = 0; m <= k; ++m) t_bar[m] -= 2.0 * s_bar[k] * t[k - m];
    // t_k = (1/k) sum_j j z_j s_{k-j}
    const double scaled = t_bar[k] / static_cast<double>(k);
    for (std::size_t j = 1; j <= k; ++j) {
      z_bar[j] += scaled * static_cast<double>(j) * s[k - j];
      s_bar[k - j] += scaled * static_cast<double>(j) * z[j];
    }
  }
  t_bar[0] -= 2.0 * t[0] * s_bar[0];
  z_bar[0] += t_bar[0] * s[0];
}

Jet jet_tanh(const Jet& x) {
  Jet t(x.order());
  std::array<double, kMaxJetOrder + 1> tv{};
  std::array<double, kMaxJetOrder + 1> sv{};
  const auto n = static_cast<std::size_t>(x.order() + 1);
  tanh_taylor(x.coeffs(), std::span<double>(tv.data(), n), std::span<double>(sv.data(), n));
  for (int k = 0; k <= x.order(); ++k) t[k] = tv[static_cast<std::size_t>(k)];
  return t;
}

Jet jet_relu(const Jet& x) {
  if (x.order() > 1) {
    throw Error(ErrorCode::invalid_argument,
                "relu jets above order 1 are distributionally zero; got order " +
                    std::to_string(x.order()));
  }
  Jet out(x.order());
  if (x[0] > 0.0) out = x;
  return out;
}

}  // namespace dnr
