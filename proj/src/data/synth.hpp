#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "data/cohort.hpp"

namespace vitalattn {

// Tokens the generator makes label-relevant: for positive records, these two
// vital channels drift upward through hours 16..24 and these ten aggregated
// features are shifted by +0.3 (clipped to [0,1]).
inline constexpr std::array<int, 2> kPlantedChannels{1, 4};
inline constexpr std::array<int, 10> kPlantedAggFeatures{5, 23, 47, 61, 88, 102, 133, 150, 171, 190};
inline constexpr int kDriftStartHour = 16;  // 1-based, inclusive
inline constexpr double kDriftTotal = 0.4;
inline constexpr double kAggShift = 0.3;

struct SynthSpec {
  int64_t n = 600;
  double positive_fraction = 0.5;
  uint64_t seed = 7;
  double missing_fraction = 0.0;  // per-entry knockout probability
};

struct GroundTruth {
  std::vector<int> important_tokens;  // planted token ids, ascending
  uint64_t seed = 0;
};

// Ids of every planted token (18 vital cells + 10 aggregated features).
std::vector<int> planted_token_ids();

// Vitals are bounded smooth random walks in [0,1]; labels are assigned first
// and signal is planted only on positives, so the label is recoverable from
// the planted tokens alone. Channel 0 and agg_0 are exempt from missingness
// knockout so imputation always has fully observed anchors.
std::pair<Cohort, GroundTruth> synth_generate(const SynthSpec& spec);

}  // namespace vitalattn
