#include "explain/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "common/errors.hpp"

namespace vitalattn {

Attribution attention_importance(const MortalityModel& model, const PatientRecord& record) {
  NoGradGuard guard;
  PredictOut out = model.forward({&record});
  const int64_t heads = out.fusion_weights.shape()[1];
  const int64_t n = out.fusion_weights.shape()[2];
  if (n != kTokens) throw ContractError("fusion weights do not cover the 364-token space");

  Attribution attribution;
  attribution.method = "attention";
  attribution.stay_id = record.stay_id;
  const auto w = out.fusion_weights.values();
  for (int t = 0; t < kTokens; ++t) {
    double acc = 0.0;
    for (int64_t h = 0; h < heads; ++h) acc += w[h * n + t];
    const double score = acc / static_cast<double>(heads);
    if (!std::isfinite(score))
      throw ContractError("model produced non-finite attention scores; is it trained?");
    attribution.scores[t] = score;
  }
  return attribution;
}

Attribution logistic_weight_importance(const LogisticModel& model) {
  Attribution attribution;
  attribution.method = "weight";
  const auto w = model.weight_values();
  for (int t = 0; t < kTokens; ++t) attribution.scores[t] = std::abs(w[t]);
  return attribution;
}

std::vector<int> ranking_desc(const std::array<double, kTokens>& scores) {
  std::vector<int> order(kTokens);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });
  return order;
}

nlohmann::json token_registry_json(const Cohort& cohort) {
  nlohmann::json registry = nlohmann::json::array();
  for (int t = 0; t < kTokens; ++t) {
    nlohmann::json entry;
    if (t < kVitalTokens) {
      entry["kind"] = "vital";
      entry["channel"] = t / kHours;
      entry["hour"] = t % kHours + 1;
    } else {
      entry["kind"] = "aggregated";
      entry["name"] = cohort.feature_names[t - kVitalTokens];
    }
    registry.push_back(std::move(entry));
  }
  return registry;
}

nlohmann::json attribution_to_json(const Attribution& attribution, const Cohort& cohort) {
  nlohmann::json j;
  j["method"] = attribution.method;
  if (!attribution.stay_id.empty()) j["stay_id"] = attribution.stay_id;
  j["scores"] = std::vector<double>(attribution.scores.begin(), attribution.scores.end());
  j["token_registry"] = token_registry_json(cohort);
  return j;
}

}  // namespace vitalattn
