#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "data/cohort.hpp"

namespace vitalattn {

// Deterministic chained-equations imputation: missing entries start at the
// column mean, then each incomplete column is re-fit by least squares on all
// other columns for a fixed number of rounds (no posterior noise). fit()
// memorizes the per-round regressions so held-out records can be imputed
// without influencing the fit.
class MiceImputer {
 public:
  explicit MiceImputer(int rounds = 10);

  Cohort fit_transform(const Cohort& cohort);
  Cohort transform(const Cohort& cohort) const;

  // Max absolute value change per round during fit; convergence diagnostic.
  const std::vector<double>& round_deltas() const { return round_deltas_; }
  int rounds() const { return rounds_; }

 private:
  struct ColumnModel {
    int column;
    std::vector<double> beta;  // intercept followed by coefficients of columns != column
  };

  int rounds_;
  bool fitted_ = false;
  std::array<double, kTokens> column_means_{};
  std::vector<std::vector<ColumnModel>> round_models_;
  std::vector<double> round_deltas_;
};

// Convenience wrapper matching the pipeline step.
Cohort mice_impute(const Cohort& cohort, int rounds = 10);

struct ScalerRegistry {
  std::array<double, kAggFeatures> agg_min{}, agg_max{};
  std::array<double, kChannels> chan_min{}, chan_max{};  // pooled over hours and patients
  std::vector<std::string> warnings;                     // constant columns
};

// Min-max scaling to [0,1]: per aggregated feature, and per vital channel
// pooled over all hours and patients. Constant columns map to 0.0 with a
// recorded warning. transform() clamps to [0,1] so train statistics applied to
// held-out records keep the range invariant.
class MinMaxScaler {
 public:
  void fit(const Cohort& cohort);
  Cohort transform(const Cohort& cohort) const;
  Cohort fit_transform(const Cohort& cohort);

  double inverse_agg(int feature, double scaled) const;
  double inverse_vital(int channel, double scaled) const;
  const ScalerRegistry& registry() const { return registry_; }

 private:
  bool fitted_ = false;
  ScalerRegistry registry_;
};

// Keeps every minority-class record and draws a seeded uniform sample of the
// majority class without replacement until the classes are equal.
Cohort undersample_balance(const Cohort& cohort, uint64_t seed);

struct WindowSample {
  std::string stay_id;
  int channel = 0;
  int start_hour = 1;              // 1..5
  std::array<double, 12> past{};   // hours start..start+11
  std::array<double, 8> future{};  // hours start+12..start+19
};

// 5 sliding windows per (record, channel): 35 samples per record.
std::vector<WindowSample> make_windows(const Cohort& cohort);

}  // namespace vitalattn
