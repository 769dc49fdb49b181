#include "data/cohort.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "common/errors.hpp"

namespace vitalattn {

bool PatientRecord::complete() const {
  for (double v : vitals)
    if (is_missing(v)) return false;
  for (double v : aggregated)
    if (is_missing(v)) return false;
  return true;
}

Cohort Cohort::with_default_names(std::string provenance) {
  Cohort c;
  c.provenance = std::move(provenance);
  c.feature_names.reserve(kAggFeatures);
  for (int f = 0; f < kAggFeatures; ++f) c.feature_names.push_back("agg_" + std::to_string(f));
  c.channel_names.reserve(kChannels);
  for (int ch = 0; ch < kChannels; ++ch) c.channel_names.push_back("c" + std::to_string(ch));
  return c;
}

int64_t Cohort::count_label(int label) const {
  int64_t n = 0;
  for (const auto& r : records) n += r.label == label ? 1 : 0;
  return n;
}

const PatientRecord* Cohort::find_stay(const std::string& stay_id) const {
  for (const auto& r : records)
    if (r.stay_id == stay_id) return &r;
  return nullptr;
}

std::string Cohort::token_name(int token_id) const {
  if (token_id < kVitalTokens) {
    const int channel = token_id / kHours;
    const int hour1 = token_id % kHours + 1;
    return "vit_" + channel_names[channel] + "_h" + std::to_string(hour1);
  }
  return feature_names[token_id - kVitalTokens];
}

namespace {

constexpr int kColumns = 2 + kAggFeatures + kVitalTokens;  // 366

std::vector<std::string> expected_columns() {
  std::vector<std::string> cols;
  cols.reserve(kColumns);
  cols.emplace_back("stay_id");
  cols.emplace_back("label");
  for (int f = 0; f < kAggFeatures; ++f) cols.push_back("agg_" + std::to_string(f));
  for (int ch = 0; ch < kChannels; ++ch)
    for (int h = 1; h <= kHours; ++h)
      cols.push_back("vit_c" + std::to_string(ch) + "_h" + std::to_string(h));
  return cols;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch != '\r') {
      field.push_back(ch);
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

double parse_cell(const std::string& field, int64_t row, const std::string& column) {
  if (field.empty()) return missing_value();
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end)
    throw DataError("row " + std::to_string(row) + ", column " + column + ": cannot parse '" +
                    field + "' as a number");
  return value;
}

std::string format_cell(double v) {
  if (is_missing(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string cohort_csv_header() {
  const auto cols = expected_columns();
  std::string header;
  for (size_t i = 0; i < cols.size(); ++i) {
    if (i) header.push_back(',');
    header += cols[i];
  }
  return header;
}

Cohort load_cohort_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open cohort file: " + path);

  static const std::vector<std::string> kExpected = expected_columns();
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file, header row required");
  const auto header = split_csv_line(line);
  if (header.size() != kExpected.size())
    throw DataError(path + ": header has " + std::to_string(header.size()) +
                    " columns, expected " + std::to_string(kExpected.size()));
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] != kExpected[i])
      throw DataError(path + ": header column " + std::to_string(i + 1) + " is '" + header[i] +
                      "', expected '" + kExpected[i] + "'");

  Cohort cohort = Cohort::with_default_names(path);
  std::unordered_set<std::string> seen_ids;
  int64_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) != kColumns)
      throw DataError("row " + std::to_string(row) + ": expected " + std::to_string(kColumns) +
                      " columns, found " + std::to_string(fields.size()));
    PatientRecord rec;
    rec.stay_id = fields[0];
    if (rec.stay_id.empty()) throw DataError("row " + std::to_string(row) + ": empty stay_id");
    if (!seen_ids.insert(rec.stay_id).second)
      throw DataError("row " + std::to_string(row) + ": duplicate stay_id '" + rec.stay_id + "'");
    if (fields[1] != "0" && fields[1] != "1")
      throw DataError("row " + std::to_string(row) + ", column label: expected 0 or 1, got '" +
                      fields[1] + "'");
    rec.label = fields[1] == "1" ? 1 : 0;
    for (int f = 0; f < kAggFeatures; ++f)
      rec.aggregated[f] = parse_cell(fields[2 + f], row, kExpected[2 + f]);
    for (int t = 0; t < kVitalTokens; ++t)
      rec.vitals[t] = parse_cell(fields[2 + kAggFeatures + t], row, kExpected[2 + kAggFeatures + t]);
    cohort.records.push_back(std::move(rec));
  }
  return cohort;
}

void save_cohort_csv(const Cohort& cohort, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write cohort file: " + path);
  out << cohort_csv_header() << '\n';
  for (const auto& rec : cohort.records) {
    out << rec.stay_id << ',' << rec.label;
    for (int f = 0; f < kAggFeatures; ++f) out << ',' << format_cell(rec.aggregated[f]);
    for (int t = 0; t < kVitalTokens; ++t) out << ',' << format_cell(rec.vitals[t]);
    out << '\n';
  }
}

}  // namespace vitalattn
