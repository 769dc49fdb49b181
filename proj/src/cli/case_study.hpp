#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli/svg.hpp"
#include "data/cohort.hpp"
#include "model/mortality.hpp"

namespace vitalattn {

struct TopToken {
  int token_id = 0;
  double score = 0.0;
  bool operator==(const TopToken&) const = default;
};

struct AggPanel {
  int token_id = 0;
  std::string name;
  double score = 0.0;
  std::array<int, 20> bins{};  // cohort histogram over [0,1]
  double patient_value = 0.0;
  bool operator==(const AggPanel&) const = default;
};

struct VitalPanel {
  int channel = 0;
  std::string channel_name;
  std::vector<int> flagged_hours;  // 1-based hours of this channel in the top list
  std::array<HourStats, 24> per_hour{};
  std::array<double, 24> patient_values{};
  bool operator==(const VitalPanel&) const = default;
};

inline bool operator==(const HourStats& a, const HourStats& b) {
  return a.min == b.min && a.q1 == b.q1 && a.median == b.median && a.q3 == b.q3 && a.max == b.max;
}

struct CaseStudyExport {
  std::string stay_id;
  std::vector<TopToken> top_tokens;  // exactly top_k, attention rank order
  std::vector<AggPanel> agg_panels;
  std::vector<VitalPanel> vital_panels;  // one panel per flagged channel
  bool operator==(const CaseStudyExport&) const = default;
};

// Ranks all 364 tokens by attention importance, keeps the top_k, groups the
// vital tokens of one channel into a single panel, and attaches cohort
// distributions for context.
CaseStudyExport build_case_study(const MortalityModel& model, const Cohort& cohort,
                                 const std::string& stay_id, int top_k = 20);

nlohmann::json case_study_to_json(const CaseStudyExport& e);
CaseStudyExport case_study_from_json(const nlohmann::json& j);

// Writes case_study.json plus one SVG per panel into out_dir.
std::vector<std::string> write_case_study(const CaseStudyExport& e, const std::string& out_dir);

// Linear-interpolation quartile summary used for the per-hour boxes.
HourStats summarize_values(std::vector<double> values);

}  // namespace vitalattn
