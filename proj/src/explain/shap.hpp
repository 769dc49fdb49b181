#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "data/cohort.hpp"
#include "model/mortality.hpp"

namespace vitalattn {

struct ShapConfig {
  int n_samples = 4096;
  uint64_t seed = 7;
  // Player subset; empty means all 364 tokens. Non-players keep the record's
  // values in every coalition evaluation.
  std::vector<int> active_tokens;
};

struct ShapResult {
  std::array<double, kTokens> values{};
  double base_value = 0.0;  // f with all players at background
  double full_value = 0.0;  // f(record)
  bool used_ridge = false;
  int64_t evaluated_coalitions = 0;
  bool enumerated = false;  // true when every interior coalition was scored
};

// KernelSHAP: coalition values fit by kernel-weighted least squares with the
// efficiency constraint (sum of attributions = full - base) eliminated into
// the solve, so it holds exactly. When 2^M - 2 fits inside n_samples the
// interior coalitions are fully enumerated with exact kernel weights;
// otherwise sizes are drawn from the kernel's size distribution in antithetic
// (mask, complement) pairs. Empty and full coalitions are always included via
// the constraints.
ShapResult kernel_shap(const BatchScorer& scorer, const std::array<double, kTokens>& record,
                       const std::array<double, kTokens>& background, const ShapConfig& cfg);

// Exact Shapley values by full 2^M enumeration with factorial weights.
// Test oracle for kernel_shap; M must be at most 12.
std::vector<double> exact_shapley(const BatchScorer& scorer,
                                  const std::array<double, kTokens>& record,
                                  const std::array<double, kTokens>& background,
                                  const std::vector<int>& active_tokens);

}  // namespace vitalattn
