#include "eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "common/errors.hpp"

namespace vitalattn {

namespace {

void check_sizes(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw ContractError("scores and labels must be non-empty and equally sized");
}

}  // namespace

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_sizes(scores, labels);
  const int64_t n = static_cast<int64_t>(scores.size());
  int64_t n_pos = 0;
  for (int y : labels) n_pos += y == 1 ? 1 : 0;
  const int64_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw ContractError("auroc needs both classes present");

  std::vector<int64_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int64_t a, int64_t b) { return scores[a] < scores[b]; });

  // average ranks over tie groups, then the rank-sum statistic
  double rank_sum_pos = 0.0;
  int64_t i = 0;
  while (i < n) {
    int64_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (int64_t k = i; k <= j; ++k)
      if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
    i = j + 1;
  }
  const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double auprc(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_sizes(scores, labels);
  const int64_t n = static_cast<int64_t>(scores.size());
  int64_t n_pos = 0;
  for (int y : labels) n_pos += y == 1 ? 1 : 0;
  if (n_pos == 0) throw ContractError("auprc needs at least one positive");

  std::vector<int64_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int64_t a, int64_t b) { return scores[a] > scores[b]; });

  double ap = 0.0;
  int64_t tp = 0;
  for (int64_t k = 0; k < n; ++k) {
    if (labels[order[k]] == 1) {
      ++tp;
      ap += static_cast<double>(tp) / static_cast<double>(k + 1);
    }
  }
  return ap / static_cast<double>(n_pos);
}

double mean_true_label_probability(const std::vector<double>& probs,
                                   const std::vector<int>& labels) {
  if (probs.size() != labels.size() || probs.empty())
    throw ContractError("probs and labels must be non-empty and equally sized");
  double acc = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) acc += labels[i] == 1 ? probs[i] : 1.0 - probs[i];
  return acc / static_cast<double>(probs.size());
}

double mean_of(const std::vector<double>& xs) {
  double acc = 0.0;
  for (double x : xs) acc += x;
  return acc / static_cast<double>(xs.size());
}

double sample_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double mu = mean_of(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - mu) * (x - mu);
  return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

}  // namespace vitalattn
