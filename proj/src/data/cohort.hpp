#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace vitalattn {

inline constexpr int kChannels = 7;
inline constexpr int kHours = 24;
inline constexpr int kAggFeatures = 196;
inline constexpr int kVitalTokens = kChannels * kHours;       // 168
inline constexpr int kTokens = kVitalTokens + kAggFeatures;   // 364

inline bool is_missing(double v) { return std::isnan(v); }
inline double missing_value() { return std::numeric_limits<double>::quiet_NaN(); }

// Unified token indexing shared by models, attributions and the fidelity
// harness: ids 0..167 are vital cells in channel-major, hour-minor order
// (c*24 + h), ids 168..363 are the aggregated features.
inline int vital_token_id(int channel, int hour1) { return channel * kHours + (hour1 - 1); }
inline int agg_token_id(int feature) { return kVitalTokens + feature; }

struct PatientRecord {
  std::string stay_id;
  int label = 0;  // 1 = death inside the prediction window
  std::array<double, kVitalTokens> vitals{};       // NaN = missing
  std::array<double, kAggFeatures> aggregated{};   // NaN = missing

  double token(int id) const { return id < kVitalTokens ? vitals[id] : aggregated[id - kVitalTokens]; }
  void set_token(int id, double v) {
    if (id < kVitalTokens)
      vitals[id] = v;
    else
      aggregated[id - kVitalTokens] = v;
  }
  double vital(int channel, int hour1) const { return vitals[vital_token_id(channel, hour1)]; }
  bool complete() const;
};

// Preprocessing advances Raw -> Imputed -> Normalized; steps check the stage
// they need and throw StateError when called out of order.
enum class CohortStage { Raw, Imputed, Normalized };

struct Cohort {
  std::vector<PatientRecord> records;
  std::vector<std::string> feature_names;   // 196
  std::vector<std::string> channel_names;   // 7
  std::string provenance;
  CohortStage stage = CohortStage::Raw;
  bool balanced = false;

  static Cohort with_default_names(std::string provenance);

  int64_t count_label(int label) const;
  const PatientRecord* find_stay(const std::string& stay_id) const;
  std::string token_name(int token_id) const;
};

// Reads the fixed cohort schema: header
// stay_id,label,agg_0..agg_195,vit_c0_h1..vit_c6_h24; empty field = missing.
Cohort load_cohort_csv(const std::string& path);
void save_cohort_csv(const Cohort& cohort, const std::string& path);

// The exact header row of the cohort schema.
std::string cohort_csv_header();

}  // namespace vitalattn
