#pragma once

#include <vector>

#include "dnr/matrix.hpp"

namespace dnr {

/// Thin SVD m = u * diag(singular_values) * v^T with k = min(rows, cols):
/// u is rows x k, v is cols x k, singular values non-increasing.
struct SvdResult {
  Matrix u;
  std::vector<double> singular_values;
  Matrix v;
};

inline constexpr int kSvdMaxSweeps = 60;

/// One-sided (Hestenes) Jacobi. Throws Error(non_convergence) if the columns
/// are not mutually orthogonal after `max_sweeps` sweeps.
SvdResult svd(const Matrix& m, int max_sweeps = kSvdMaxSweeps);

std::vector<double> svd_singular_values(const Matrix& m);

}  // namespace dnr
