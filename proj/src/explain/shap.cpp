#include "explain/shap.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "common/errors.hpp"
#include "core/kernels.hpp"
#include "core/linalg.hpp"
#include "core/rng.hpp"

namespace vitalattn {

namespace {

std::vector<int> resolve_players(const std::vector<int>& active) {
  std::vector<int> players = active;
  if (players.empty()) {
    players.resize(kTokens);
    std::iota(players.begin(), players.end(), 0);
    return players;
  }
  std::unordered_set<int> seen;
  for (int p : players) {
    if (p < 0 || p >= kTokens)
      throw ContractError("active token id " + std::to_string(p) + " out of range");
    if (!seen.insert(p).second)
      throw ContractError("duplicate active token id " + std::to_string(p));
  }
  return players;
}

std::array<double, kTokens> coalition_input(const std::array<double, kTokens>& record,
                                            const std::array<double, kTokens>& background,
                                            const std::vector<int>& players,
                                            const std::vector<uint8_t>& mask) {
  std::array<double, kTokens> x = record;
  for (size_t j = 0; j < players.size(); ++j)
    if (!mask[j]) x[players[j]] = background[players[j]];
  return x;
}

double log_choose(int m, int s) {
  return std::lgamma(m + 1.0) - std::lgamma(s + 1.0) - std::lgamma(m - s + 1.0);
}

}  // namespace

ShapResult kernel_shap(const BatchScorer& scorer, const std::array<double, kTokens>& record,
                       const std::array<double, kTokens>& background, const ShapConfig& cfg) {
  const std::vector<int> players = resolve_players(cfg.active_tokens);
  const int m = static_cast<int>(players.size());

  ShapResult result;
  {
    std::array<double, kTokens> base = record;
    for (int p : players) base[p] = background[p];
    const auto probe = scorer({base, record});
    result.base_value = probe[0];
    result.full_value = probe[1];
  }
  const double delta = result.full_value - result.base_value;

  if (m == 1) {
    result.values[players[0]] = delta;
    result.enumerated = true;
    return result;
  }
  if (cfg.n_samples < 2 * m + 2)
    throw ContractError("kernel_shap needs n_samples >= 2M+2 (M=" + std::to_string(m) + ")");

  // interior coalition masks plus their kernel weights
  std::vector<std::vector<uint8_t>> masks;
  std::vector<double> weights;
  const bool enumerate = m <= 20 && ((1LL << m) - 2) <= static_cast<int64_t>(cfg.n_samples);
  if (enumerate) {
    for (int64_t bits = 1; bits < (1LL << m) - 1; ++bits) {
      std::vector<uint8_t> mask(m, 0);
      int s = 0;
      for (int j = 0; j < m; ++j)
        if (bits & (1LL << j)) {
          mask[j] = 1;
          ++s;
        }
      masks.push_back(std::move(mask));
      weights.push_back(static_cast<double>(m - 1) /
                        (std::exp(log_choose(m, s)) * s * (m - s)));
    }
  } else {
    // draw sizes from the kernel size distribution, subsets uniformly, in
    // antithetic (mask, complement) pairs; sampled rows carry unit weight
    std::vector<double> size_cdf(m - 1);
    double total = 0.0;
    for (int s = 1; s < m; ++s) {
      total += static_cast<double>(m - 1) / (static_cast<double>(s) * (m - s));
      size_cdf[s - 1] = total;
    }
    Rng rng(cfg.seed);
    std::vector<int> pool(m);
    std::iota(pool.begin(), pool.end(), 0);
    const int pairs = cfg.n_samples / 2;
    for (int i = 0; i < pairs; ++i) {
      const double u = rng.uniform() * total;
      int s = 1;
      while (s < m - 1 && size_cdf[s - 1] < u) ++s;
      // partial Fisher-Yates: the first s entries become the subset
      for (int j = 0; j < s; ++j) {
        const int k = j + static_cast<int>(rng.below(m - j));
        std::swap(pool[j], pool[k]);
      }
      std::vector<uint8_t> mask(m, 0), anti(m, 1);
      for (int j = 0; j < s; ++j) {
        mask[pool[j]] = 1;
        anti[pool[j]] = 0;
      }
      masks.push_back(std::move(mask));
      weights.push_back(1.0);
      masks.push_back(std::move(anti));
      weights.push_back(1.0);
    }
  }
  result.enumerated = enumerate;
  result.evaluated_coalitions = static_cast<int64_t>(masks.size()) + 2;

  std::vector<std::array<double, kTokens>> inputs;
  inputs.reserve(masks.size());
  for (const auto& mask : masks) inputs.push_back(coalition_input(record, background, players, mask));
  const std::vector<double> values = scorer(inputs);

  // eliminate the last player via the efficiency constraint, then weighted
  // least squares on the remaining m-1 attributions
  const int64_t rows = static_cast<int64_t>(masks.size());
  const int64_t cols = m - 1;
  std::vector<double> xw(rows * cols), yw(rows);
  for (int64_t r = 0; r < rows; ++r) {
    const double sw = std::sqrt(weights[r]);
    const auto& mask = masks[r];
    const double y = values[r] - result.base_value - (mask[m - 1] ? delta : 0.0);
    yw[r] = sw * y;
    for (int64_t j = 0; j < cols; ++j)
      xw[r * cols + j] = sw * (static_cast<double>(mask[j]) - static_cast<double>(mask[m - 1]));
  }
  std::vector<double> a(cols * cols), b(cols);
  kernels::matmul_tn(xw.data(), xw.data(), a.data(), cols, rows, cols);
  kernels::matmul_tn(xw.data(), yw.data(), b.data(), cols, rows, 1);

  const std::vector<double> beta = linalg::solve_spd(std::move(a), std::move(b), cols, 1e-8,
                                                     &result.used_ridge);
  double assigned = 0.0;
  for (int64_t j = 0; j < cols; ++j) {
    result.values[players[j]] = beta[j];
    assigned += beta[j];
  }
  result.values[players[m - 1]] = delta - assigned;
  return result;
}

std::vector<double> exact_shapley(const BatchScorer& scorer,
                                  const std::array<double, kTokens>& record,
                                  const std::array<double, kTokens>& background,
                                  const std::vector<int>& active_tokens) {
  const std::vector<int> players = resolve_players(active_tokens);
  const int m = static_cast<int>(players.size());
  if (m > 12)
    throw ContractError("exact Shapley enumeration is limited to 12 active tokens, got " +
                        std::to_string(m));

  const int64_t n_masks = 1LL << m;
  std::vector<std::array<double, kTokens>> inputs;
  inputs.reserve(n_masks);
  for (int64_t bits = 0; bits < n_masks; ++bits) {
    std::vector<uint8_t> mask(m, 0);
    for (int j = 0; j < m; ++j) mask[j] = (bits >> j) & 1;
    inputs.push_back(coalition_input(record, background, players, mask));
  }
  const std::vector<double> v = scorer(inputs);

  std::vector<double> fact(m + 1, 1.0);
  for (int i = 1; i <= m; ++i) fact[i] = fact[i - 1] * i;

  std::vector<double> phi(m, 0.0);
  for (int j = 0; j < m; ++j) {
    for (int64_t bits = 0; bits < n_masks; ++bits) {
      if (bits & (1LL << j)) continue;
      const int s = static_cast<int>(std::popcount(static_cast<uint64_t>(bits)));
      const double w = fact[s] * fact[m - s - 1] / fact[m];
      phi[j] += w * (v[bits | (1LL << j)] - v[bits]);
    }
  }
  return phi;
}

}  // namespace vitalattn
