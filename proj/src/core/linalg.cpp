#include "core/linalg.hpp"

#include <cmath>

#include "common/errors.hpp"

namespace vitalattn::linalg {

bool cholesky_factor(std::vector<double>& a, int64_t n) {
  for (int64_t j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (int64_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    const double ljj = std::sqrt(d);
    a[j * n + j] = ljj;
    for (int64_t i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (int64_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / ljj;
    }
  }
  return true;
}

void cholesky_backsolve(const std::vector<double>& l, int64_t n, std::vector<double>& x) {
  for (int64_t i = 0; i < n; ++i) {
    double s = x[i];
    for (int64_t k = 0; k < i; ++k) s -= l[i * n + k] * x[k];
    x[i] = s / l[i * n + i];
  }
  for (int64_t i = n - 1; i >= 0; --i) {
    double s = x[i];
    for (int64_t k = i + 1; k < n; ++k) s -= l[k * n + i] * x[k];
    x[i] = s / l[i * n + i];
  }
}

std::vector<double> solve_spd(std::vector<double> a, std::vector<double> b, int64_t n,
                              double ridge, bool* used_ridge) {
  if (used_ridge) *used_ridge = false;
  std::vector<double> factor = a;
  if (!cholesky_factor(factor, n)) {
    double diag_mean = 0.0;
    for (int64_t i = 0; i < n; ++i) diag_mean += a[i * n + i];
    diag_mean = n > 0 ? diag_mean / static_cast<double>(n) : 1.0;
    const double bump = ridge * (diag_mean > 0.0 ? diag_mean : 1.0);
    factor = a;
    for (int64_t i = 0; i < n; ++i) factor[i * n + i] += bump;
    if (!cholesky_factor(factor, n))
      throw ContractError("linear system is singular even after ridge regularization");
    if (used_ridge) *used_ridge = true;
  }
  cholesky_backsolve(factor, n, b);
  return b;
}

}  // namespace vitalattn::linalg
