#pragma once

#include <cstdint>
#include <vector>

namespace vitalattn::linalg {

// In-place Cholesky factorization of a symmetric positive definite matrix
// (row-major n x n). Returns false if a non-positive pivot is hit.
bool cholesky_factor(std::vector<double>& a, int64_t n);

// Solves L L^T x = b given the factor from cholesky_factor.
void cholesky_backsolve(const std::vector<double>& l, int64_t n, std::vector<double>& x);

// Solves A x = b for SPD-ish A. Tries a plain Cholesky first; on failure retries
// with `ridge * mean(diag)` added to the diagonal. Sets *used_ridge when the
// fallback fired. Throws ContractError if even the ridged system fails.
std::vector<double> solve_spd(std::vector<double> a, std::vector<double> b, int64_t n,
                              double ridge, bool* used_ridge = nullptr);

}  // namespace vitalattn::linalg
