#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "data/cohort.hpp"
#include "model/baselines.hpp"
#include "model/mortality.hpp"

namespace vitalattn {

// Importance score per token over the shared 364-token space.
struct Attribution {
  std::string method;   // attention | shap | weight
  std::string stay_id;  // empty for global attributions
  std::array<double, kTokens> scores{};
};

// Mean over heads of the classification query's attention row. Scores are
// non-negative and sum to 1.
Attribution attention_importance(const MortalityModel& model, const PatientRecord& record);

// Global importance: absolute weight per token.
Attribution logistic_weight_importance(const LogisticModel& model);

// Token ids ordered by score descending, ties broken by token id.
std::vector<int> ranking_desc(const std::array<double, kTokens>& scores);

nlohmann::json token_registry_json(const Cohort& cohort);
nlohmann::json attribution_to_json(const Attribution& attribution, const Cohort& cohort);

}  // namespace vitalattn
