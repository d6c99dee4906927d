#include "dnr/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dnr/error.hpp"

namespace dnr {

namespace {

constexpr double kOrthogonalityTol = 1e-15;

// Works on a tall matrix (rows >= cols).
SvdResult jacobi_tall(const Matrix& a, int max_sweeps) {
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  Matrix u = a;
  Matrix v = Matrix::identity(cols);

  bool converged = cols < 2;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < cols; ++p) {
      for (std::size_t q = p + 1; q < cols; ++q) {
        double alpha = 0.0;
        double beta = 0.0;
        double gamma = 0.0;
        for (std::size_t i = 0; i < rows; ++i) {
          const double up = u(i, p);
          const double uq = u(i, q);
          alpha += up * up;
          beta += uq * uq;
          gamma += up * uq;
        }
        if (gamma == 0.0 || std::abs(gamma) <= kOrthogonalityTol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < rows; ++i) {
          const double up = u(i, p);
          const double uq = u(i, q);
          u(i, p) = c * up - s * uq;
          u(i, q) = s * up + c * uq;
        }
        for (std::size_t i = 0; i < cols; ++i) {
          const double vp = v(i, p);
          const double vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    converged = !rotated;
  }
  if (!converged) {
    throw Error(ErrorCode::non_convergence, "one-sided Jacobi SVD of " + a.shape() +
                                                " not converged after " +
                                                std::to_string(max_sweeps) + " sweeps");
  }

  std::vector<double> sigma(cols);
  for (std::size_t j = 0; j < cols; ++j) {
    double norm = 0.0;
    for (std::size_t i = 0; i < rows; ++i) norm += u(i, j) * u(i, j);
    sigma[j] = std::sqrt(norm);
  }
  std::vector<std::size_t> order(cols);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  SvdResult out{Matrix(rows, cols), std::vector<double>(cols), Matrix(cols, cols)};
  for (std::size_t k = 0; k < cols; ++k) {
    const std::size_t j = order[k];
    out.singular_values[k] = sigma[j];
    for (std::size_t i = 0; i < rows; ++i) out.u(i, k) = sigma[j] > 0.0 ? u(i, j) / sigma[j] : 0.0;
    for (std::size_t i = 0; i < cols; ++i) out.v(i, k) = v(i, j);
  }
  return out;
}

}  // namespace

SvdResult svd(const Matrix& m, int max_sweeps) {
  if (m.empty()) throw Error(ErrorCode::invalid_argument, "svd of empty matrix");
  if (m.rows() >= m.cols()) return jacobi_tall(m, max_sweeps);
  SvdResult t = jacobi_tall(transpose(m), max_sweeps);
  return SvdResult{std::move(t.v), std::move(t.singular_values), std::move(t.u)};
}

std::vector<double> svd_singular_values(const Matrix& m) { return svd(m).singular_values; }

}  // namespace dnr
