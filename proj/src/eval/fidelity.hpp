#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "data/cohort.hpp"
#include "model/mortality.hpp"

namespace vitalattn {

enum class FidelityDirection { Plus, Minus };
enum class SubstitutionMode { Uniform, Permutation };

struct MetricPoint {
  std::string metric;  // auroc | auprc | mean_prob
  double baseline = 0.0;
  double perturbed = 0.0;  // mean over draws
  double delta = 0.0;      // perturbed - baseline
};

struct FidelityRung {
  double fraction = 0.0;
  int k = 0;  // ceil(fraction * 364) tokens substituted
  MetricPoint auroc_point, auprc_point, prob_point;
};

struct FidelityReport {
  std::string model_tag;
  std::string method_tag;
  FidelityDirection direction = FidelityDirection::Plus;
  std::vector<FidelityRung> rungs;
  int draws = 0;
  uint64_t seed = 0;
  SubstitutionMode substitution = SubstitutionMode::Uniform;
};

struct FidelityConfig {
  FidelityDirection direction = FidelityDirection::Plus;
  std::vector<double> fractions = {0.05, 0.10, 0.20};
  int draws = 10;
  uint64_t seed = 7;
  SubstitutionMode substitution = SubstitutionMode::Uniform;
};

// Per-record token importances; global attributions broadcast one array.
using AttributionProvider = std::function<std::array<double, kTokens>(int64_t record_index)>;

// The perturbation protocol: rank tokens per record by attribution, substitute
// the top-k (plus) or bottom-k (minus) with Uniform[0,1] draws (or values
// permuted from other records), rescore the cohort, and average the metric
// deltas over `draws` seeded substitution draws.
FidelityReport run_fidelity(const BatchScorer& scorer, const Cohort& cohort,
                            const AttributionProvider& provider, const std::string& model_tag,
                            const std::string& method_tag, const FidelityConfig& cfg);

nlohmann::json fidelity_report_to_json(const FidelityReport& report);

// Text table in the row layout {Fidelity+, Fidelity-} x {AUROC, AUPRC, Prob.}
// with one column per (model, method) report pair, deltas at the headline
// fraction (the rung closest to it).
std::string render_fidelity_table(const std::vector<FidelityReport>& reports,
                                  double headline_fraction = 0.10);
std::string render_fidelity_csv(const std::vector<FidelityReport>& reports,
                                double headline_fraction = 0.10);

}  // namespace vitalattn
