#include "data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "common/errors.hpp"
#include "core/rng.hpp"

namespace vitalattn {

std::vector<int> planted_token_ids() {
  std::vector<int> ids;
  for (int ch : kPlantedChannels)
    for (int h = kDriftStartHour; h <= kHours; ++h) ids.push_back(vital_token_id(ch, h));
  for (int f : kPlantedAggFeatures) ids.push_back(agg_token_id(f));
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::pair<Cohort, GroundTruth> synth_generate(const SynthSpec& spec) {
  if (spec.n < 10) throw ContractError("synthetic cohort needs n >= 10");
  if (!(spec.positive_fraction > 0.0 && spec.positive_fraction < 1.0))
    throw ContractError("positive fraction must lie in (0,1)");
  if (spec.missing_fraction < 0.0 || spec.missing_fraction >= 1.0)
    throw ContractError("missing fraction must lie in [0,1)");

  Rng rng(spec.seed);

  const int64_t n_pos = std::llround(static_cast<double>(spec.n) * spec.positive_fraction);
  std::vector<int> labels(spec.n, 0);
  for (int64_t i = 0; i < n_pos; ++i) labels[i] = 1;
  rng.shuffle(labels);

  Cohort cohort = Cohort::with_default_names("synth seed=" + std::to_string(spec.seed));
  cohort.records.reserve(spec.n);

  for (int64_t i = 0; i < spec.n; ++i) {
    PatientRecord rec;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "synth-%06lld", static_cast<long long>(i));
    rec.stay_id = buf;
    rec.label = labels[i];

    for (int f = 0; f < kAggFeatures; ++f) rec.aggregated[f] = rng.uniform();
    if (rec.label == 1)
      for (int f : kPlantedAggFeatures)
        rec.aggregated[f] = std::min(1.0, rec.aggregated[f] + kAggShift);

    for (int ch = 0; ch < kChannels; ++ch) {
      double v = rng.uniform(0.3, 0.7);
      for (int h = 1; h <= kHours; ++h) {
        rec.vitals[vital_token_id(ch, h)] = v;
        v = std::clamp(v + 0.04 * rng.normal(), 0.0, 1.0);
      }
    }
    if (rec.label == 1) {
      for (int ch : kPlantedChannels) {
        for (int h = kDriftStartHour; h <= kHours; ++h) {
          const double ramp = kDriftTotal * static_cast<double>(h - kDriftStartHour + 1) /
                              static_cast<double>(kHours - kDriftStartHour + 1);
          const int id = vital_token_id(ch, h);
          rec.vitals[id] = std::min(1.0, rec.vitals[id] + ramp);
        }
      }
    }

    // knockout pass; draw for every token so the stream layout is fixed
    for (int t = 0; t < kTokens; ++t) {
      const bool hit = rng.uniform() < spec.missing_fraction;
      const bool exempt = (t < kHours) || t == agg_token_id(0);  // channel 0 and agg_0
      if (hit && !exempt) rec.set_token(t, missing_value());
    }

    cohort.records.push_back(std::move(rec));
  }

  GroundTruth truth;
  truth.important_tokens = planted_token_ids();
  truth.seed = spec.seed;
  return {std::move(cohort), std::move(truth)};
}

}  // namespace vitalattn
