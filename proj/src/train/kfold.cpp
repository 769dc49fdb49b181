#include "train/kfold.hpp"

#include <algorithm>

#include "common/errors.hpp"
#include "core/rng.hpp"

namespace vitalattn {

std::vector<FoldSplit> stratified_kfold(const Cohort& cohort, int k, uint64_t seed) {
  if (k < 2) throw ContractError("stratified k-fold needs k >= 2");
  std::vector<int64_t> pos, neg;
  for (int64_t i = 0; i < static_cast<int64_t>(cohort.records.size()); ++i)
    (cohort.records[i].label == 1 ? pos : neg).push_back(i);
  if (static_cast<int>(pos.size()) < k || static_cast<int>(neg.size()) < k)
    throw ContractError("stratified k-fold needs at least k members of each class (have " +
                        std::to_string(pos.size()) + " positive, " + std::to_string(neg.size()) +
                        " negative, k=" + std::to_string(k) + ")");

  Rng rng(seed);
  rng.shuffle(pos);
  rng.shuffle(neg);

  std::vector<FoldSplit> folds(k);
  for (size_t i = 0; i < pos.size(); ++i) folds[i % k].test.push_back(pos[i]);
  for (size_t i = 0; i < neg.size(); ++i) folds[i % k].test.push_back(neg[i]);
  for (auto& fold : folds) {
    std::sort(fold.test.begin(), fold.test.end());
    std::vector<bool> in_test(cohort.records.size(), false);
    for (int64_t i : fold.test) in_test[i] = true;
    for (int64_t i = 0; i < static_cast<int64_t>(cohort.records.size()); ++i)
      if (!in_test[i]) fold.train.push_back(i);
  }
  return folds;
}

Cohort subset_cohort(const Cohort& cohort, const std::vector<int64_t>& indices) {
  Cohort out = cohort;
  out.records.clear();
  out.records.reserve(indices.size());
  for (int64_t i : indices) out.records.push_back(cohort.records[i]);
  return out;
}

}  // namespace vitalattn
