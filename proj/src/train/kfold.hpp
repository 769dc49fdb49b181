#pragma once

#include <cstdint>
#include <vector>

#include "data/cohort.hpp"

namespace vitalattn {

struct FoldSplit {
  std::vector<int64_t> train;
  std::vector<int64_t> test;
};

// Stratified k-fold: classes are shuffled separately (seeded) and dealt
// round-robin, so per-fold class counts differ from the global ratio by at
// most one record. Test sets partition the cohort.
std::vector<FoldSplit> stratified_kfold(const Cohort& cohort, int k, uint64_t seed);

Cohort subset_cohort(const Cohort& cohort, const std::vector<int64_t>& indices);

}  // namespace vitalattn
