#pragma once

#include <array>
#include <initializer_list>
#include <span>

namespace dnr {

inline constexpr int kMaxJetOrder = 4;

/// Truncated Taylor series of a scalar along one direction:
/// f(x + e) = c_0 + c_1 e + ... + c_K e^K, so that d^k f = k! * c_k.
class Jet {
 public:
  explicit Jet(int order = 0);
  Jet(int order, std::initializer_list<double> coeffs);

  /// Seeds the independent variable: [x, 1, 0, ...].
  static Jet variable(double x, int order);
  static Jet constant(double c, int order);

  int order() const noexcept { return order_; }
  double operator[](int k) const { return coeffs_[static_cast<std::size_t>(k)]; }
  double& operator[](int k) { return coeffs_[static_cast<std::size_t>(k)]; }
  std::span<const double> coeffs() const { return {coeffs_.data(), static_cast<std::size_t>(order_ + 1)}; }

  /// k-th derivative, k! * c_k.
  double derivative(int k) const;

 private:
  int order_;
  std::array<double, kMaxJetOrder + 1> coeffs_{};
};

Jet operator+(const Jet& a, const Jet& b);
Jet operator-(const Jet& a, const Jet& b);
Jet operator*(double s, const Jet& a);

/// Truncated Cauchy product. Throws Error(order_mismatch) on unequal orders.
Jet jet_mul(const Jet& a, const Jet& b);
Jet jet_tanh(const Jet& x);
/// Only orders <= 1 are meaningful; higher orders are rejected.
Jet jet_relu(const Jet& x);

double factorial(int k);

/// Taylor coefficients of t = tanh(z) and s = 1 - t^2, via t' = s z'.
/// All spans have length K + 1.
void tanh_taylor(std::span<const double> z, std::span<double> t, std::span<double> s);

/// Reverse sweep of tanh_taylor. `t_bar` is consumed (overwritten);
/// `z_bar` receives the adjoint of z (overwritten, not accumulated).
void tanh_taylor_adjoint(std::span<const double> z, std::span<const double> t,
                         std::span<const double> s, std::span<double> t_bar,
                         std::span<double> z_bar);

}  // namespace dnr
