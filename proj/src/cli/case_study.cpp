#include "cli/case_study.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "common/errors.hpp"
#include "explain/attribution.hpp"

namespace vitalattn {

HourStats summarize_values(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const size_t lo = static_cast<size_t>(pos);
    const size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
  };
  HourStats s;
  s.min = values.front();
  s.q1 = quantile(0.25);
  s.median = quantile(0.5);
  s.q3 = quantile(0.75);
  s.max = values.back();
  return s;
}

CaseStudyExport build_case_study(const MortalityModel& model, const Cohort& cohort,
                                 const std::string& stay_id, int top_k) {
  const PatientRecord* record = cohort.find_stay(stay_id);
  if (!record) throw DataError("stay_id '" + stay_id + "' not found in the cohort");
  if (top_k < 1 || top_k > kTokens) throw ContractError("top_k must lie in [1,364]");

  const Attribution attribution = attention_importance(model, *record);
  const std::vector<int> ranking = ranking_desc(attribution.scores);

  CaseStudyExport e;
  e.stay_id = stay_id;
  for (int i = 0; i < top_k; ++i)
    e.top_tokens.push_back({ranking[i], attribution.scores[ranking[i]]});

  // aggregated tokens get a histogram panel each; vital tokens of the same
  // channel are grouped into one panel with their hours flagged
  std::vector<std::vector<int>> channel_hours(kChannels);
  for (const auto& top : e.top_tokens) {
    if (top.token_id < kVitalTokens) {
      channel_hours[top.token_id / kHours].push_back(top.token_id % kHours + 1);
    } else {
      const int f = top.token_id - kVitalTokens;
      AggPanel panel;
      panel.token_id = top.token_id;
      panel.name = cohort.feature_names[f];
      panel.score = top.score;
      for (const auto& rec : cohort.records) {
        const double v = std::clamp(rec.aggregated[f], 0.0, 1.0);
        const int bin = std::min(19, static_cast<int>(v * 20.0));
        ++panel.bins[bin];
      }
      panel.patient_value = record->aggregated[f];
      e.agg_panels.push_back(std::move(panel));
    }
  }

  for (int ch = 0; ch < kChannels; ++ch) {
    if (channel_hours[ch].empty()) continue;
    VitalPanel panel;
    panel.channel = ch;
    panel.channel_name = cohort.channel_names[ch];
    panel.flagged_hours = channel_hours[ch];
    std::sort(panel.flagged_hours.begin(), panel.flagged_hours.end());
    for (int h = 1; h <= kHours; ++h) {
      std::vector<double> values;
      values.reserve(cohort.records.size());
      for (const auto& rec : cohort.records) values.push_back(rec.vital(ch, h));
      panel.per_hour[h - 1] = summarize_values(std::move(values));
      panel.patient_values[h - 1] = record->vital(ch, h);
    }
    e.vital_panels.push_back(std::move(panel));
  }
  return e;
}

nlohmann::json case_study_to_json(const CaseStudyExport& e) {
  nlohmann::json j;
  j["stay_id"] = e.stay_id;
  j["top_tokens"] = nlohmann::json::array();
  for (const auto& t : e.top_tokens)
    j["top_tokens"].push_back({{"token_id", t.token_id}, {"score", t.score}});
  j["aggregated_panels"] = nlohmann::json::array();
  for (const auto& p : e.agg_panels) {
    nlohmann::json pj;
    pj["token_id"] = p.token_id;
    pj["name"] = p.name;
    pj["score"] = p.score;
    pj["bins"] = p.bins;
    pj["patient_value"] = p.patient_value;
    j["aggregated_panels"].push_back(std::move(pj));
  }
  j["vital_panels"] = nlohmann::json::array();
  for (const auto& p : e.vital_panels) {
    nlohmann::json pj;
    pj["channel"] = p.channel;
    pj["channel_name"] = p.channel_name;
    pj["flagged_hours"] = p.flagged_hours;
    pj["patient_values"] = p.patient_values;
    pj["per_hour"] = nlohmann::json::array();
    for (const auto& s : p.per_hour)
      pj["per_hour"].push_back({{"min", s.min},
                                {"q1", s.q1},
                                {"median", s.median},
                                {"q3", s.q3},
                                {"max", s.max}});
    j["vital_panels"].push_back(std::move(pj));
  }
  return j;
}

CaseStudyExport case_study_from_json(const nlohmann::json& j) {
  CaseStudyExport e;
  e.stay_id = j.at("stay_id").get<std::string>();
  for (const auto& t : j.at("top_tokens"))
    e.top_tokens.push_back({t.at("token_id").get<int>(), t.at("score").get<double>()});
  for (const auto& pj : j.at("aggregated_panels")) {
    AggPanel p;
    p.token_id = pj.at("token_id").get<int>();
    p.name = pj.at("name").get<std::string>();
    p.score = pj.at("score").get<double>();
    p.bins = pj.at("bins").get<std::array<int, 20>>();
    p.patient_value = pj.at("patient_value").get<double>();
    e.agg_panels.push_back(std::move(p));
  }
  for (const auto& pj : j.at("vital_panels")) {
    VitalPanel p;
    p.channel = pj.at("channel").get<int>();
    p.channel_name = pj.at("channel_name").get<std::string>();
    p.flagged_hours = pj.at("flagged_hours").get<std::vector<int>>();
    p.patient_values = pj.at("patient_values").get<std::array<double, 24>>();
    const auto& hours = pj.at("per_hour");
    for (size_t h = 0; h < 24; ++h) {
      const auto& s = hours.at(h);
      p.per_hour[h] = {s.at("min").get<double>(), s.at("q1").get<double>(),
                       s.at("median").get<double>(), s.at("q3").get<double>(),
                       s.at("max").get<double>()};
    }
    e.vital_panels.push_back(std::move(p));
  }
  return e;
}

std::vector<std::string> write_case_study(const CaseStudyExport& e, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::vector<std::string> written;

  const std::string json_path = (fs::path(out_dir) / "case_study.json").string();
  std::ofstream out(json_path);
  if (!out) throw DataError("cannot write " + json_path);
  out << case_study_to_json(e).dump(2) << '\n';
  written.push_back(json_path);

  char buf[64];
  for (const auto& p : e.agg_panels) {
    std::snprintf(buf, sizeof(buf), "agg_token_%03d.svg", p.token_id);
    const std::string path = (fs::path(out_dir) / buf).string();
    std::ofstream svg(path);
    std::snprintf(buf, sizeof(buf), "%.4f", p.score);
    svg << render_histogram_panel(p.name + " (score " + buf + ")", p.bins, p.patient_value);
    written.push_back(path);
  }
  for (const auto& p : e.vital_panels) {
    std::snprintf(buf, sizeof(buf), "vital_channel_%d.svg", p.channel);
    const std::string path = (fs::path(out_dir) / buf).string();
    std::ofstream svg(path);
    svg << render_channel_panel("channel " + p.channel_name, p.per_hour, p.patient_values,
                                p.flagged_hours);
    written.push_back(path);
  }
  return written;
}

}  // namespace vitalattn
